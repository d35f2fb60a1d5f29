//! Sparse non-negative factorization `P ~ O V^T` with block hold-out
//! model selection.

mod cv;
mod init;
mod mask;
mod solver;

pub use cv::{cv_grid, fit_restarts, CvCell, CvOptions, CvReport};
pub use init::{nndsvd, random_init, singular_values};
pub use mask::{make_block_masks, HoldoutMask};
pub use solver::{
    masked_nmf, masked_nmf_from, masked_residual, reconstruction_error, sparsity_penalty,
    FactorPair, Init, NmfOptions, EPSILON,
};
