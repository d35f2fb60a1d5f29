//! Hyper-parameter selection over `(d, beta)` by block hold-out.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mask::{make_block_masks, HoldoutMask};
use super::solver::{masked_nmf, masked_residual, sparsity_penalty, FactorPair, Init, NmfOptions};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub q: usize,
    pub restarts: usize,
    pub seed: u64,
    pub nmf: NmfOptions,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            q: 1,
            restarts: 5,
            seed: 0,
            nmf: NmfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub d: usize,
    pub beta: f64,
    /// Held-out error `E` (penalized) of each successful restart.
    pub errors: Vec<f64>,
    /// Unpenalized held-out residual of each successful restart.
    pub residuals: Vec<f64>,
    pub failed: usize,
    pub mean_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub grid: Vec<(usize, f64)>,
    pub cells: Vec<CvCell>,
    pub selected: (usize, f64),
    pub k: usize,
    pub q: usize,
    pub restarts: usize,
    pub seed: u64,
}

fn restart_options(opts: &NmfOptions, seed: u64, restart: usize) -> NmfOptions {
    let init = match opts.init {
        Init::Nndsvd => Init::Nndsvd,
        Init::Random { .. } => Init::Random {
            seed: derive_seed(seed, 1_000 + restart as u64),
        },
    };
    NmfOptions { init, ..*opts }
}

/// Evaluates every `(d, beta)` pair on `restarts` seeded hold-out masks and
/// selects the pair with the lowest mean held-out error (ties: smaller `d`,
/// then smaller `beta`). Restart `r` uses the same mask for every cell.
pub fn cv_grid(
    p: ArrayView2<f64>,
    d_list: &[usize],
    beta_list: &[f64],
    opts: &CvOptions,
) -> Result<CvReport> {
    if d_list.is_empty() || beta_list.is_empty() {
        return Err(Error::InvalidArgument("empty d or beta list".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let (m, n) = p.dim();
    let masks: Vec<HoldoutMask> = (0..opts.restarts)
        .map(|r| make_block_masks(m, n, opts.k, opts.q, derive_seed(opts.seed, r as u64)))
        .collect::<Result<_>>()?;
    let held_out: Vec<_> = masks.iter().map(HoldoutMask::held_out).collect();

    let grid: Vec<(usize, f64)> = d_list
        .iter()
        .flat_map(|&d| beta_list.iter().map(move |&b| (d, b)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..opts.restarts).map(move |r| (c, r)))
        .collect();

    let outcomes: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (d, beta) = grid[c];
            let nmf = restart_options(&opts.nmf, opts.seed, r);
            let fp = masked_nmf(p, Some(&masks[r]), d, beta, &nmf)?;
            let resid = masked_residual(p, fp.o.view(), fp.v.view(), held_out[r].view())?;
            Ok((
                resid + beta * sparsity_penalty(fp.o.view(), fp.v.view()),
                resid,
            ))
        })
        .collect();

    let mut cells: Vec<CvCell> = grid
        .iter()
        .map(|&(d, beta)| CvCell {
            d,
            beta,
            errors: Vec::new(),
            residuals: Vec::new(),
            failed: 0,
            mean_error: None,
        })
        .collect();
    for (&(c, r), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok((e, resid)) => {
                cells[c].errors.push(e);
                cells[c].residuals.push(resid);
            }
            Err(err) => {
                log::warn!(
                    "d={} beta={} restart {r} failed: {err}",
                    grid[c].0,
                    grid[c].1
                );
                cells[c].failed += 1;
            }
        }
    }
    for cell in &mut cells {
        if cell.errors.is_empty() {
            log::warn!(
                "d={} beta={}: every restart failed, cell excluded",
                cell.d,
                cell.beta
            );
        } else {
            cell.mean_error = Some(cell.errors.iter().sum::<f64>() / cell.errors.len() as f64);
        }
    }

    let selected = cells
        .iter()
        .filter_map(|c| c.mean_error.map(|e| (e, c.d, c.beta)))
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        })
        .map(|(_, d, b)| (d, b))
        .ok_or(Error::AllCellsFailed)?;

    Ok(CvReport {
        grid,
        cells,
        selected,
        k: opts.k,
        q: opts.q,
        restarts: opts.restarts,
        seed: opts.seed,
    })
}

/// Fits the full matrix `restarts` times and keeps the lowest final
/// objective. Restart 0 uses `opts.init`; later restarts use seeded
/// random initializations.
pub fn fit_restarts(
    p: ArrayView2<f64>,
    d: usize,
    beta: f64,
    restarts: usize,
    seed: u64,
    opts: &NmfOptions,
) -> Result<FactorPair> {
    let restarts = restarts.max(1);
    let fits: Vec<Result<FactorPair>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                match opts.init {
                    Init::Nndsvd => Init::Nndsvd,
                    Init::Random { .. } => Init::Random {
                        seed: derive_seed(seed, 0),
                    },
                }
            } else {
                Init::Random {
                    seed: derive_seed(seed, r as u64),
                }
            };
            let mut fp = masked_nmf(p, None, d, beta, &NmfOptions { init, ..*opts })?;
            fp.seed = seed;
            Ok(fp)
        })
        .collect();
    let mut best: Option<FactorPair> = None;
    let mut first_err = None;
    for fit in fits {
        match fit {
            Ok(fp) => {
                if best
                    .as_ref()
                    .is_none_or(|b| fp.final_objective() < b.final_objective())
                {
                    best = Some(fp);
                }
            }
            Err(e) => {
                log::warn!("restart failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::AllCellsFailed))
}
