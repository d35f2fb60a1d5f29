//! Sparse non-negative "interaction embeddings" of objects learned from how
//! verbs are applied to nouns in dependency-parsed text.
//!
//! The pipeline counts verb applications ([`extract`]), converts counts to
//! PPMI ([`ppmi`]), factorizes with masked sparse NMF ([`nmf`]), ranks verbs
//! per object ([`ranking`]) and regresses external object dimensions on the
//! embedding ([`regression`]). [`pipeline`] wires the steps to files.

pub mod conllu;
pub mod error;
pub mod extract;
pub mod io;
pub mod nmf;
pub mod pipeline;
pub mod ppmi;
pub mod ranking;
pub mod regression;
pub mod rng;
pub mod sparse;
pub mod stats;
pub mod synthetic;
pub mod vocab;

pub use error::{Error, Result};
