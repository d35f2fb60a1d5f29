//! Python bindings. Matrices cross the boundary as lists of rows.

use std::collections::BTreeSet;
use std::path::PathBuf;

use afford_core::extract::{extract_pairs, BigramMode};
use afford_core::nmf::{self, CvOptions, FactorPair, Init, NmfOptions};
use afford_core::pipeline::{self, Overrides, Run};
use afford_core::ranking::{self, SimilarityMatrix, VerbRanking};
use afford_core::regression::{self, LassoOptions, RegressionOptions, TargetMatrix};
use afford_core::sparse::SparseMatrix;
use afford_core::vocab::{load_vocab, VocabIndex};
use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: afford_core::Error) -> PyErr {
    match e {
        afford_core::Error::Io { .. } | afford_core::Error::Stream(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Array2::from_shape_vec((m, n), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn index(prefix: &str, n: usize) -> VocabIndex {
    VocabIndex::from_entries((0..n).map(|i| format!("{prefix}{i}"))).0
}

fn dense_to_sparse(a: &Array2<f64>) -> PyResult<SparseMatrix> {
    let (m, n) = a.dim();
    SparseMatrix::from_triplets(
        index("r", m),
        index("c", n),
        a.indexed_iter()
            .filter(|(_, &x)| x != 0.0)
            .map(|((i, k), &x)| (i, k, x)),
    )
    .map_err(err)
}

/// Normalized vocabulary entries of a one-per-line file.
#[pyfunction]
fn read_vocab(path: PathBuf) -> PyResult<Vec<String>> {
    let (v, _) = load_vocab(&path).map_err(err)?;
    Ok(v.entries().to_vec())
}

/// Noun x verb application counts from CoNLL-U files.
#[pyfunction]
#[pyo3(signature = (corpus, nouns, verbs, bigrams = true))]
fn extract_counts(
    corpus: Vec<PathBuf>,
    nouns: PathBuf,
    verbs: PathBuf,
    bigrams: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let (nv, _) = load_vocab(&nouns).map_err(err)?;
    let (vv, _) = load_vocab(&verbs).map_err(err)?;
    let mode = if bigrams {
        BigramMode::Merge
    } else {
        BigramMode::Off
    };
    let mut total = Array2::zeros((nv.len(), vv.len()));
    for path in corpus {
        let reader = afford_core::conllu::open_corpus(&path).map_err(err)?;
        let m = extract_pairs(reader, &nv, &vv, mode).map_err(err)?;
        total += &m.to_dense();
    }
    Ok(to_rows(&total))
}

/// Positive pointwise mutual information of a count matrix.
#[pyfunction]
fn ppmi(counts: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let c = dense_to_sparse(&to_array(counts)?)?;
    let p = afford_core::ppmi::ppmi(&c).map_err(err)?;
    Ok(to_rows(&p.matrix.to_dense()))
}

/// A fitted embedding `P ~ O V^T`.
#[pyclass(module = "afford")]
struct Factorization {
    inner: FactorPair,
    similarity: SimilarityMatrix,
}

#[pymethods]
impl Factorization {
    /// Fits with NNDSVD for the first restart and seeded random starts after.
    #[staticmethod]
    #[pyo3(signature = (p, d, beta, restarts = 1, seed = 0, max_iter = 2000, tol = 1e-6))]
    fn fit(
        p: Vec<Vec<f64>>,
        d: usize,
        beta: f64,
        restarts: usize,
        seed: u64,
        max_iter: usize,
        tol: f64,
    ) -> PyResult<Self> {
        let p = to_array(p)?;
        let opts = NmfOptions {
            max_iter,
            tol,
            ..Default::default()
        };
        let inner = nmf::fit_restarts(p.view(), d, beta, restarts, seed, &opts).map_err(err)?;
        let similarity = ranking::similarity_matrix(&inner).map_err(err)?;
        Ok(Factorization { inner, similarity })
    }

    #[getter]
    fn o(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.o)
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        to_rows(&self.inner.v)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.objective_trace.clone()
    }

    /// Dimension-by-verb cosine similarity.
    #[getter]
    fn similarity(&self) -> Vec<Vec<f64>> {
        to_rows(&self.similarity.s)
    }

    /// Verb indices ordered best first, with the score of every verb.
    fn rank(&self, object: usize) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let r = ranking::object_verb_ranking(&self.inner, &self.similarity, object).map_err(err)?;
        Ok((r.order, r.scores))
    }

    fn __repr__(&self) -> String {
        format!(
            "Factorization(m={}, n={}, d={}, beta={}, objective={:.6})",
            self.inner.o.nrows(),
            self.inner.v.nrows(),
            self.inner.d,
            self.inner.beta,
            self.inner.final_objective()
        )
    }
}

/// Cross-validates `(d, beta)`; returns `{"selected": (d, beta), "cells": [...]}`.
#[pyfunction]
#[pyo3(signature = (p, d_list, beta_list, k = 10, q = 1, restarts = 5, seed = 0, max_iter = 2000))]
#[allow(clippy::too_many_arguments)]
fn cv_grid<'py>(
    py: Python<'py>,
    p: Vec<Vec<f64>>,
    d_list: Vec<usize>,
    beta_list: Vec<f64>,
    k: usize,
    q: usize,
    restarts: usize,
    seed: u64,
    max_iter: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = to_array(p)?;
    let opts = CvOptions {
        k,
        q,
        restarts,
        seed,
        nmf: NmfOptions {
            max_iter,
            init: Init::Nndsvd,
            ..Default::default()
        },
    };
    let report = nmf::cv_grid(p.view(), &d_list, &beta_list, &opts).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("selected", report.selected)?;
    let cells: Vec<(usize, f64, Option<f64>)> = report
        .cells
        .iter()
        .map(|c| (c.d, c.beta, c.mean_error))
        .collect();
    out.set_item("cells", cells)?;
    Ok(out)
}

/// Mean of `1 - rank / n` over the truth indices, ranking by descending score.
#[pyfunction]
fn aauc(scores: Vec<f64>, truth: Vec<usize>) -> PyResult<f64> {
    let r = VerbRanking::from_scores(0, scores);
    let truth: BTreeSet<usize> = truth.into_iter().collect();
    ranking::aauc(&r, &truth).map_err(err)
}

/// Non-negative Lasso weights for `(1/2m)||y - Xw||^2 + lambda ||w||_1`.
#[pyfunction]
fn nonneg_lasso(x: Vec<Vec<f64>>, y: Vec<f64>, lam: f64) -> PyResult<Vec<f64>> {
    let x = to_array(x)?;
    let y = Array1::from(y);
    let fit =
        regression::nonneg_lasso(x.view(), y.view(), lam, &LassoOptions::default()).map_err(err)?;
    Ok(fit.w.to_vec())
}

/// Cross-validated regression of every target column on the embedding.
/// Returns one dict per column.
#[pyfunction]
#[pyo3(signature = (o, y, folds = 2, seed = 0))]
fn fit_regression<'py>(
    py: Python<'py>,
    o: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    folds: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let o = to_array(o)?;
    let y = to_array(y)?;
    let m = y.nrows();
    let targets = TargetMatrix {
        noun_ids: (0..m).collect(),
        objects: (0..m).map(|i| i.to_string()).collect(),
        dim_labels: (0..y.ncols()).map(|h| h.to_string()).collect(),
        y,
    };
    let opts = RegressionOptions {
        folds,
        seed,
        ..Default::default()
    };
    let fit = regression::fit_all_dims(o.view(), &targets, &opts).map_err(err)?;
    fit.dims
        .iter()
        .map(|d| {
            let out = PyDict::new(py);
            out.set_item("weights", d.w.to_vec())?;
            out.set_item("lambda_star", d.lambda_star)?;
            out.set_item("pearson_r", d.pearson_r())?;
            out.set_item("p_value", d.p_value())?;
            out.set_item("predictions", d.yhat.to_vec())?;
            Ok(out)
        })
        .collect()
}

/// Runs one pipeline command (`extract`, `ppmi`, ..., `all`) for a config
/// file and returns the path of its main artifact.
#[pyfunction]
#[pyo3(signature = (config, command = "all", output_dir = None))]
fn run_pipeline(config: PathBuf, command: &str, output_dir: Option<PathBuf>) -> PyResult<String> {
    let overrides = Overrides {
        output_dir,
        ..Default::default()
    };
    let run = Run::load(&config, &overrides).map_err(err)?;
    let path = match command {
        "extract" => pipeline::cmd_extract(&run),
        "ppmi" => pipeline::cmd_ppmi(&run),
        "factorize" => pipeline::cmd_factorize(&run),
        "cv" => pipeline::cmd_cv(&run).map(|_| run.output_dir().join("cv_report.json")),
        "rank" => pipeline::cmd_rank(&run),
        "eval" => pipeline::cmd_eval(&run),
        "regress" => pipeline::cmd_regress(&run),
        "report" => pipeline::cmd_report(&run),
        "all" => pipeline::cmd_all(&run),
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    }
    .map_err(err)?;
    Ok(path.display().to_string())
}

#[pymodule]
fn afford(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Factorization>()?;
    m.add_function(wrap_pyfunction!(read_vocab, m)?)?;
    m.add_function(wrap_pyfunction!(extract_counts, m)?)?;
    m.add_function(wrap_pyfunction!(ppmi, m)?)?;
    m.add_function(wrap_pyfunction!(cv_grid, m)?)?;
    m.add_function(wrap_pyfunction!(aauc, m)?)?;
    m.add_function(wrap_pyfunction!(nonneg_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(fit_regression, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
