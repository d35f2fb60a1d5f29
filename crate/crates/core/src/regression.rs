//! Predicting external object dimensions from the embedding with a
//! non-negative Lasso, plus correlation and attribution analyses.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::LabeledMatrix;
use crate::ppmi::PpmiMatrix;
use crate::ranking::{cosine_scores, VerbRanking};
use crate::rng::rng;
use crate::stats::{pearson, Correlation};
use crate::vocab::VocabIndex;

/// Target rows aligned to nouns of the vocabulary, in vocabulary order.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub y: Array2<f64>,
    pub noun_ids: Vec<usize>,
    pub objects: Vec<String>,
    pub dim_labels: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AlignStats {
    pub input_rows: usize,
    pub not_in_vocab: usize,
    pub no_observations: usize,
    /// Rows merged into another row with the same noun.
    pub averaged: usize,
}

/// Drops rows whose noun is unknown or has an all-zero PPMI row, averages
/// rows that share a noun and orders the result by noun id.
pub fn align_targets(
    raw: &LabeledMatrix,
    nouns: &VocabIndex,
    p: &PpmiMatrix,
) -> Result<(TargetMatrix, AlignStats)> {
    if raw.values.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "target values must be finite and non-negative".into(),
        ));
    }
    let mut stats = AlignStats {
        input_rows: raw.row_labels.len(),
        ..Default::default()
    };
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, label) in raw.row_labels.iter().enumerate() {
        let Some(i) = nouns.lookup(label) else {
            stats.not_in_vocab += 1;
            continue;
        };
        if i >= p.matrix.n_rows() || p.matrix.row(i).next().is_none() {
            stats.no_observations += 1;
            continue;
        }
        groups.entry(i).or_default().push(r);
    }
    if groups.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let dims = raw.col_labels.len();
    let mut y = Array2::zeros((groups.len(), dims));
    let mut noun_ids = Vec::with_capacity(groups.len());
    let mut objects = Vec::with_capacity(groups.len());
    for (out, (i, rows)) in groups.into_iter().enumerate() {
        stats.averaged += rows.len() - 1;
        let mean = raw
            .values
            .select(Axis(0), &rows)
            .mean_axis(Axis(0))
            .unwrap();
        y.row_mut(out).assign(&mean);
        noun_ids.push(i);
        objects.push(nouns.entries()[i].clone());
    }
    Ok((
        TargetMatrix {
            y,
            noun_ids,
            objects,
            dim_labels: raw.col_labels.clone(),
        },
        stats,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LassoOptions {
    /// Converged when the largest coordinate change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoFit {
    pub w: Array1<f64>,
    pub converged: bool,
    pub sweeps: usize,
    /// Largest KKT violation at the returned point.
    pub kkt_gap: f64,
}

/// `(1/2m) ||y - X w||^2 + lambda ||w||_1`.
pub fn lasso_objective(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    lambda: f64,
) -> f64 {
    let m = x.nrows() as f64;
    let r = &y - &x.dot(&w);
    r.dot(&r) / (2.0 * m) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of the non-negative Lasso optimality conditions:
/// `g_j + lambda = 0` where `w_j > 0`, `g_j + lambda >= 0` where `w_j = 0`,
/// with `g = (1/m) X^T (X w - y)`.
pub fn kkt_violation(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    lambda: f64,
) -> f64 {
    let m = x.nrows() as f64;
    let g = x.t().dot(&(&x.dot(&w) - &y)) / m;
    g.iter()
        .zip(w.iter())
        .map(|(&gj, &wj)| {
            if wj > 0.0 {
                (gj + lambda).abs()
            } else {
                (-(gj + lambda)).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn check_lasso_inputs(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows, y {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must be >= 0"
        )));
    }
    Ok(())
}

/// Non-negative Lasso by cyclic coordinate descent from `w = 0`.
pub fn nonneg_lasso(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    nonneg_lasso_from(x, y, lambda, Array1::zeros(x.ncols()), opts)
}

/// Coordinate descent from a given non-negative starting point.
pub fn nonneg_lasso_from(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    mut w: Array1<f64>,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    check_lasso_inputs(x, y, lambda)?;
    if w.len() != x.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "w has {} entries, X {} columns",
            w.len(),
            x.ncols()
        )));
    }
    w.mapv_inplace(|v| v.max(0.0));
    let m = x.nrows() as f64;
    let col_sq: Vec<f64> = x.columns().into_iter().map(|c| c.dot(&c) / m).collect();
    let mut resid = &y - &x.dot(&w);
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for (j, col) in x.columns().into_iter().enumerate() {
            let a = col_sq[j];
            if a == 0.0 {
                w[j] = 0.0;
                continue;
            }
            let rho = col.dot(&resid) / m + a * w[j];
            let next = (rho - lambda).max(0.0) / a;
            let delta = next - w[j];
            if delta != 0.0 {
                resid.scaled_add(-delta, &col);
                w[j] = next;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    let kkt_gap = kkt_violation(x, y, w.view(), lambda);
    if !converged {
        log::warn!(
            "non-negative lasso did not converge in {sweeps} sweeps (KKT gap {kkt_gap:.3e})"
        );
    }
    Ok(LassoFit {
        w,
        converged,
        sweeps,
        kkt_gap,
    })
}

/// `count` log-spaced values from `min` to `max`, ascending.
pub fn lambda_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![min],
        _ => {
            let (a, b) = (min.ln(), max.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvLambda {
    pub lambda_star: f64,
    /// `(lambda, mean held-out squared error)` in grid order.
    pub cv_curve: Vec<(f64, f64)>,
    /// Out-of-fold predictions at `lambda_star`.
    pub yhat: Array1<f64>,
}

/// Relative slack under which two CV errors count as tied.
const CV_TIE_TOLERANCE: f64 = 1e-9;

fn fold_assignment(m: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng(seed));
    let mut fold = vec![0; m];
    for (pos, i) in order.into_iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Chooses `lambda` by k-fold cross-validation. Ties (within a relative
/// `1e-9`) go to the larger `lambda`.
pub fn cv_lambda(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    grid: &[f64],
    folds: usize,
    seed: u64,
    opts: &LassoOptions,
) -> Result<CvLambda> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let m = x.nrows();
    if folds < 2 || m < folds {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds for {m} samples"
        )));
    }
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows, y {}",
            x.nrows(),
            y.len()
        )));
    }
    let fold = fold_assignment(m, folds, seed);
    let split: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| fold[i] == f);
            (train, test)
        })
        .collect();

    // Solve from the largest lambda down, warm-starting each fit.
    let mut by_desc: Vec<usize> = (0..grid.len()).collect();
    by_desc.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut errors = vec![0.0; grid.len()];
    let mut weights: Vec<Vec<Array1<f64>>> = vec![Vec::new(); grid.len()];
    for (train, test) in &split {
        let xt = x.select(Axis(0), train);
        let yt = y.select(Axis(0), train);
        let xv = x.select(Axis(0), test);
        let yv = y.select(Axis(0), test);
        let mut w = Array1::zeros(x.ncols());
        for &g in &by_desc {
            let fit = nonneg_lasso_from(xt.view(), yt.view(), grid[g], w, opts)?;
            let r = &yv - &xv.dot(&fit.w);
            errors[g] += r.dot(&r) / test.len() as f64 / folds as f64;
            w = fit.w;
            weights[g].push(w.clone());
        }
    }

    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let star = (0..grid.len())
        .filter(|&g| errors[g] <= best + best.abs() * CV_TIE_TOLERANCE)
        .max_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .expect("non-empty grid");

    let mut yhat = Array1::zeros(m);
    for ((_, test), w) in split.iter().zip(&weights[star]) {
        for &i in test {
            yhat[i] = x.row(i).dot(w);
        }
    }
    Ok(CvLambda {
        lambda_star: grid[star],
        cv_curve: grid.iter().copied().zip(errors).collect(),
        yhat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RegressionOptions {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub lasso: LassoOptions,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            grid: lambda_grid(1e-7, 1e3, 50),
            folds: 2,
            seed: 0,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit {
    pub label: String,
    /// Weights of the full-data refit at `lambda_star`.
    pub w: Array1<f64>,
    pub lambda_star: f64,
    pub cv_curve: Vec<(f64, f64)>,
    /// Out-of-fold predictions.
    pub yhat: Array1<f64>,
    /// Correlation of the target with the out-of-fold predictions.
    pub oof: Correlation,
    /// Correlation of the target with the full-data refit predictions.
    pub refit: Correlation,
    pub converged: bool,
    pub contributions: Vec<f64>,
}

impl DimensionFit {
    pub fn pearson_r(&self) -> f64 {
        self.oof.r
    }

    pub fn p_value(&self) -> f64 {
        self.oof.p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub dims: Vec<DimensionFit>,
}

impl RegressionFit {
    /// `m x D` matrix of out-of-fold predictions.
    pub fn yhat_matrix(&self) -> Array2<f64> {
        let m = self.dims.first().map_or(0, |d| d.yhat.len());
        let mut out = Array2::zeros((m, self.dims.len()));
        for (h, d) in self.dims.iter().enumerate() {
            out.column_mut(h).assign(&d.yhat);
        }
        out
    }
}

fn fit_dimension(
    o: ArrayView2<f64>,
    y: ArrayView1<f64>,
    label: &str,
    opts: &RegressionOptions,
) -> Result<DimensionFit> {
    let cv = cv_lambda(o, y, &opts.grid, opts.folds, opts.seed, &opts.lasso)?;
    let full = nonneg_lasso(o, y, cv.lambda_star, &opts.lasso)?;
    let refit_pred = o.dot(&full.w);
    Ok(DimensionFit {
        label: label.to_string(),
        oof: pearson(y, cv.yhat.iter()),
        refit: pearson(y, refit_pred.iter()),
        contributions: contribution_analysis(full.w.view(), o),
        w: full.w,
        lambda_star: cv.lambda_star,
        cv_curve: cv.cv_curve,
        yhat: cv.yhat,
        converged: full.converged,
    })
}

/// Cross-validated non-negative Lasso for every target column. `o` must
/// have one row per target row, in the same order.
pub fn fit_all_dims(
    o: ArrayView2<f64>,
    targets: &TargetMatrix,
    opts: &RegressionOptions,
) -> Result<RegressionFit> {
    if o.nrows() != targets.y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} rows, targets {}",
            o.nrows(),
            targets.y.nrows()
        )));
    }
    let dims = (0..targets.y.ncols())
        .into_par_iter()
        .map(|h| {
            let label = targets.dim_labels.get(h).map_or("", String::as_str);
            fit_dimension(o, targets.y.column(h), label, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegressionFit { dims })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestMatch {
    pub dim: usize,
    pub r: f64,
    /// The target column has zero variance.
    pub degenerate: bool,
}

/// For each target column, the embedding column with the highest Pearson r.
pub fn best_match_correlation(y: ArrayView2<f64>, o: ArrayView2<f64>) -> Result<Vec<BestMatch>> {
    if y.nrows() != o.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "Y has {} rows, O {}",
            y.nrows(),
            o.nrows()
        )));
    }
    Ok(y.columns()
        .into_iter()
        .map(|yc| {
            let mut best = BestMatch {
                dim: 0,
                r: f64::NEG_INFINITY,
                degenerate: false,
            };
            for (h, oc) in o.columns().into_iter().enumerate() {
                let c = pearson(yc.iter(), oc.iter());
                if c.r > best.r {
                    best = BestMatch {
                        dim: h,
                        r: c.r,
                        degenerate: false,
                    };
                }
            }
            if pearson(yc.iter(), yc.iter()).degenerate || !best.r.is_finite() {
                best = BestMatch {
                    dim: 0,
                    r: 0.0,
                    degenerate: true,
                };
            }
            best
        })
        .collect())
}

/// Ranks verbs for each predicted dimension by cosine against the
/// reconstruction `O V^T`, with the prediction in place of `O[:, h]`.
/// `o` holds the embedding rows of the same objects as `yhat`. All-zero
/// prediction columns yield `None`.
pub fn spose_verb_assignment(
    yhat: ArrayView2<f64>,
    o: ArrayView2<f64>,
    v: ArrayView2<f64>,
) -> Result<Vec<Option<VerbRanking>>> {
    let clamped = yhat.mapv(|x| x.max(0.0));
    let (s, zero) = cosine_scores(clamped.view(), o, v)?;
    Ok(s.axis_iter(Axis(0))
        .enumerate()
        .map(|(h, row)| (!zero.contains(&h)).then(|| VerbRanking::from_scores(h, row.to_vec())))
        .collect())
}

/// Share of each embedding dimension in a prediction, as percentages of
/// `w_i * ||O[:, i]||`.
pub fn contribution_analysis(w: ArrayView1<f64>, o: ArrayView2<f64>) -> Vec<f64> {
    let parts: Vec<f64> = w
        .iter()
        .zip(o.columns())
        .map(|(&wi, col)| wi.max(0.0) * col.dot(&col).sqrt())
        .collect();
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return vec![0.0; parts.len()];
    }
    parts.into_iter().map(|c| 100.0 * c / total).collect()
}
