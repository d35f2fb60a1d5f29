//! Masked multiplicative updates for sparse NMF.
//!
//! Minimizes `F(O, V) = ||M_t * (P - O V^T)||_F^2 + beta * (sum O + sum V)`
//! over non-negative `O` and `V`. Each half-step is the exact minimizer of
//! the Lee-Seung majorizer of `F`, so `F` never increases.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::init::{nndsvd, random_init};
use super::mask::HoldoutMask;
use crate::error::{Error, Result};

/// Denominator guard used when `beta == 0`.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Init {
    Nndsvd,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfOptions {
    pub max_iter: usize,
    /// Stop once the relative objective decrease over `window` iterations
    /// falls below `tol`. A non-positive `tol` disables early stopping.
    pub tol: f64,
    pub window: usize,
    pub init: Init,
}

impl Default for NmfOptions {
    fn default() -> Self {
        NmfOptions {
            max_iter: 2000,
            tol: 1e-6,
            window: 10,
            init: Init::Nndsvd,
        }
    }
}

/// Non-negative factors `O` (m x d) and `V` (n x d) with fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub o: Array2<f64>,
    pub v: Array2<f64>,
    pub beta: f64,
    pub d: usize,
    pub seed: u64,
    pub iterations_run: usize,
    /// Objective before the first update followed by one value per iteration.
    pub objective_trace: Vec<f64>,
}

impl FactorPair {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NAN)
    }

    /// `O V^T`.
    pub fn reconstruction(&self) -> Array2<f64> {
        self.o.dot(&self.v.t())
    }
}

/// `sum O + sum V`.
pub fn sparsity_penalty(o: ArrayView2<f64>, v: ArrayView2<f64>) -> f64 {
    o.sum() + v.sum()
}

fn check_inputs(p: ArrayView2<f64>, d: usize, beta: f64) -> Result<()> {
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix must be finite and non-negative".into(),
        ));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "beta = {beta} must be finite and >= 0"
        )));
    }
    Ok(())
}

fn masked(product: Array2<f64>, train: Option<&Array2<f64>>) -> Array2<f64> {
    match train {
        Some(t) => product * t,
        None => product,
    }
}

fn objective(
    mp: &Array2<f64>,
    recon_masked: &Array2<f64>,
    o: &Array2<f64>,
    v: &Array2<f64>,
    beta: f64,
) -> f64 {
    let mut sq = 0.0;
    Zip::from(mp).and(recon_masked).for_each(|&a, &b| {
        let r = a - b;
        sq += r * r;
    });
    sq + beta * sparsity_penalty(o.view(), v.view())
}

fn multiply_update(factor: &mut Array2<f64>, num: &Array2<f64>, den: &Array2<f64>, shift: f64) {
    Zip::from(factor).and(num).and(den).for_each(|f, &n, &d| {
        *f *= n / (d + shift);
    });
}

fn all_finite(a: &Array2<f64>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Runs masked multiplicative updates from the configured initialization.
/// `mask = None` trains on every cell.
pub fn masked_nmf(
    p: ArrayView2<f64>,
    mask: Option<&HoldoutMask>,
    d: usize,
    beta: f64,
    opts: &NmfOptions,
) -> Result<FactorPair> {
    check_inputs(p, d, beta)?;
    let train = match mask {
        Some(mask) => {
            if mask.shape() != p.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "mask {:?} vs matrix {:?}",
                    mask.shape(),
                    p.dim()
                )));
            }
            Some(mask.training())
        }
        None => None,
    };
    let mp = masked(p.to_owned(), train.as_ref());
    let (o, v, seed) = match opts.init {
        Init::Nndsvd => {
            let (o, v) = nndsvd(mp.view(), d)?;
            (o, v, 0)
        }
        Init::Random { seed } => {
            let (o, v) = random_init(mp.view(), d, seed);
            (o, v, seed)
        }
    };
    run_updates(&mp, train.as_ref(), o, v, beta, seed, opts)
}

/// Runs the updates from explicit starting factors.
pub fn masked_nmf_from(
    p: ArrayView2<f64>,
    mask: Option<&HoldoutMask>,
    o: Array2<f64>,
    v: Array2<f64>,
    beta: f64,
    opts: &NmfOptions,
) -> Result<FactorPair> {
    let d = o.ncols();
    check_inputs(p, d, beta)?;
    if o.nrows() != p.nrows() || v.nrows() != p.ncols() || v.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "O {:?}, V {:?} vs matrix {:?}",
            o.dim(),
            v.dim(),
            p.dim()
        )));
    }
    if o.iter().chain(v.iter()).any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial factors must be non-negative".into(),
        ));
    }
    let train = mask.map(HoldoutMask::training);
    let mp = masked(p.to_owned(), train.as_ref());
    run_updates(&mp, train.as_ref(), o, v, beta, 0, opts)
}

fn run_updates(
    mp: &Array2<f64>,
    train: Option<&Array2<f64>>,
    mut o: Array2<f64>,
    mut v: Array2<f64>,
    beta: f64,
    seed: u64,
    opts: &NmfOptions,
) -> Result<FactorPair> {
    let shift = if beta > 0.0 { beta / 2.0 } else { EPSILON };
    let d = o.ncols();
    let mut recon = masked(o.dot(&v.t()), train);
    let mut trace = vec![objective(mp, &recon, &o, &v, beta)];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;

        let num = mp.dot(&v);
        let den = recon.dot(&v);
        multiply_update(&mut o, &num, &den, shift);
        if !all_finite(&o) {
            return Err(Error::Diverged {
                what: "O",
                iteration: iterations,
            });
        }

        recon = masked(o.dot(&v.t()), train);
        let num = mp.t().dot(&o);
        let den = recon.t().dot(&o);
        multiply_update(&mut v, &num, &den, shift);
        if !all_finite(&v) {
            return Err(Error::Diverged {
                what: "V",
                iteration: iterations,
            });
        }

        recon = masked(o.dot(&v.t()), train);
        let f = objective(mp, &recon, &o, &v, beta);
        if !f.is_finite() {
            return Err(Error::Diverged {
                what: "objective",
                iteration: iterations,
            });
        }
        trace.push(f);

        if opts.tol > 0.0 && iterations >= opts.window.max(1) {
            let before = trace[iterations - opts.window.max(1)];
            if before <= f64::MIN_POSITIVE || (before - f) / before < opts.tol {
                break;
            }
        }
    }

    Ok(FactorPair {
        o,
        v,
        beta,
        d,
        seed,
        iterations_run: iterations,
        objective_trace: trace,
    })
}

/// `E = ||M_v * (P - O V^T)||_F^2 + beta * (sum O + sum V)`.
pub fn reconstruction_error(
    p: ArrayView2<f64>,
    o: ArrayView2<f64>,
    v: ArrayView2<f64>,
    held_out: ArrayView2<f64>,
    beta: f64,
) -> Result<f64> {
    Ok(masked_residual(p, o, v, held_out)? + beta * sparsity_penalty(o, v))
}

/// `||M_v * (P - O V^T)||_F^2` without the sparsity term.
pub fn masked_residual(
    p: ArrayView2<f64>,
    o: ArrayView2<f64>,
    v: ArrayView2<f64>,
    held_out: ArrayView2<f64>,
) -> Result<f64> {
    if o.nrows() != p.nrows() || v.nrows() != p.ncols() || o.ncols() != v.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "O {:?}, V {:?} vs matrix {:?}",
            o.dim(),
            v.dim(),
            p.dim()
        )));
    }
    if held_out.dim() != p.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mask {:?} vs matrix {:?}",
            held_out.dim(),
            p.dim()
        )));
    }
    let recon = o.dot(&v.t());
    let mut sq = 0.0;
    Zip::from(p)
        .and(&recon)
        .and(held_out)
        .for_each(|&a, &b, &m| {
            if m != 0.0 {
                let r = m * (a - b);
                sq += r * r;
            }
        });
    Ok(sq)
}
