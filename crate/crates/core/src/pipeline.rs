//! File-based pipeline: every command reads its inputs from the run
//! directory (or the config) and writes its artifacts atomically.
//!
//! | command     | reads                         | writes |
//! |-------------|-------------------------------|--------|
//! | `extract`   | corpus, vocabularies          | `counts.tsv` |
//! | `ppmi`      | `counts.tsv`                  | `ppmi.tsv`, `ppmi_diagnostics.json` |
//! | `factorize` | `ppmi.tsv`                    | `O.tsv`, `V.tsv`, `factors.json` |
//! | `cv`        | `ppmi.tsv`                    | `cv_report.json` |
//! | `rank`      | factors                       | `rankings.tsv` |
//! | `eval`      | factors, ppmi, counts, truth  | `aauc_*.tsv`, `histogram_*.tsv`, `aauc_summary.json`, `aauc_table.tsv` |
//! | `regress`   | factors, ppmi, targets        | `regression.json`, `regression_summary.tsv` |
//! | `report`    | everything above              | `report.json`, `report_aauc.tsv`, `report_regression.tsv` |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::conllu::open_corpus;
use crate::error::{Error, Result};
use crate::extract::{BigramMode, PairCounts};
use crate::io::{
    atomic_write, fmt_sig, read_json, read_target_table, read_truth_table, write_json,
    LabeledMatrix, WordVectors,
};
use crate::nmf::{cv_grid, fit_restarts, CvOptions, CvReport, FactorPair, Init, NmfOptions};
use crate::ppmi::{ppmi, PpmiMatrix};
use crate::ranking::{
    evaluate_dataset, histogram, object_verb_ranking, similarity_matrix, truth_sets, AaucReport,
    EmbeddingScorer, FrequencyScorer, ModelScorer, PpmiScorer, VerbScorer,
};
use crate::regression::{
    align_targets, best_match_correlation, fit_all_dims, lambda_grid, spose_verb_assignment,
    LassoOptions, RegressionOptions,
};
use crate::sparse::SparseMatrix;
use crate::stats::paired_ttest;
use crate::vocab::{load_vocab, VocabIndex};

pub const FORMAT_VERSION: &str = "1";
/// Overrides `paths.output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "AFFORD_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: String,
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub extract: ExtractParams,
    #[serde(default)]
    pub nmf: NmfParams,
    #[serde(default)]
    pub rank: RankParams,
    #[serde(default)]
    pub eval: EvalParams,
    #[serde(default)]
    pub regression: RegressionParams,
}

/// Relative paths resolve against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Files or glob patterns of CoNLL-U input (`.gz` is decompressed).
    #[serde(default)]
    pub corpus: Vec<String>,
    pub nouns: PathBuf,
    pub verbs: PathBuf,
    #[serde(default)]
    pub targets: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExtractParams {
    #[serde(default)]
    pub bigrams: BigramMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmfParams {
    pub d: usize,
    pub beta: f64,
    pub d_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub k: usize,
    pub q: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub random_init: bool,
}

impl Default for NmfParams {
    fn default() -> Self {
        NmfParams {
            d: 70,
            beta: 0.3,
            d_list: vec![50, 70, 100, 150],
            beta_list: vec![0.05, 0.1, 0.3, 0.5],
            k: 10,
            q: 1,
            restarts: 5,
            max_iter: 2000,
            tol: 1e-6,
            random_init: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankParams {
    /// Objects to rank; all nouns when absent.
    pub objects: Option<Vec<String>>,
    pub top_n: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        RankParams {
            objects: None,
            top_n: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub name: String,
    pub path: PathBuf,
    /// Keep rows whose score reaches this value (when a score column exists).
    #[serde(default)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Baseline {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalParams {
    pub datasets: Vec<Dataset>,
    pub baselines: Vec<Baseline>,
    pub histogram_bins: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            datasets: Vec::new(),
            baselines: Vec::new(),
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionParams {
    pub grid_size: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub folds: usize,
    /// Fold seed; the run seed when absent.
    pub seed: Option<u64>,
    pub top_verbs: usize,
}

impl Default for RegressionParams {
    fn default() -> Self {
        RegressionParams {
            grid_size: 50,
            lambda_min: 1e-7,
            lambda_max: 1e3,
            folds: 2,
            seed: None,
            top_verbs: 10,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub d: Option<usize>,
    pub beta: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

/// A validated config bound to its base directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    base: PathBuf,
    output_dir: PathBuf,
    pub hash: String,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// SHA-256 over the canonical JSON with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.output_dir = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Run {
    /// Loads, overrides and validates a config file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let config = RunConfig::from_json(&text)?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Run::new(config, base, overrides)
    }

    pub fn new(mut config: RunConfig, base: PathBuf, overrides: &Overrides) -> Result<Self> {
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(d) = overrides.d {
            config.nmf.d = d;
        }
        if let Some(beta) = overrides.beta {
            config.nmf.beta = beta;
        }
        let output_dir = overrides
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| config.paths.output_dir.clone());
        let run = Run {
            hash: config.hash(),
            output_dir: if output_dir.is_absolute() {
                output_dir
            } else {
                base.join(output_dir)
            },
            config,
            base,
        };
        run.validate()?;
        Ok(run)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.format_version != FORMAT_VERSION {
            return Err(config_err(format!(
                "unsupported format_version {:?} (expected {FORMAT_VERSION:?})",
                c.format_version
            )));
        }
        let mut required = vec![c.paths.nouns.clone(), c.paths.verbs.clone()];
        required.extend(c.paths.targets.iter().cloned());
        required.extend(c.eval.datasets.iter().map(|d| d.path.clone()));
        required.extend(c.eval.baselines.iter().map(|b| b.path.clone()));
        for p in required {
            let full = self.resolve(&p);
            if !full.is_file() {
                return Err(config_err(format!("missing input {}", full.display())));
            }
        }
        self.corpus_files()?;
        if c.nmf.d == 0 || c.nmf.d_list.contains(&0) {
            return Err(config_err("nmf dimensions must be positive"));
        }
        let bad = |b: f64| b.is_nan() || b < 0.0;
        if bad(c.nmf.beta) || c.nmf.beta_list.iter().any(|&b| bad(b)) {
            return Err(config_err("nmf beta must be non-negative"));
        }
        if c.nmf.k < 2 || c.nmf.q == 0 || c.nmf.q >= c.nmf.k {
            return Err(config_err("nmf requires K >= 2 and 1 <= q < K"));
        }
        if c.regression.grid_size == 0 || c.regression.folds < 2 {
            return Err(config_err(
                "regression requires grid_size >= 1 and folds >= 2",
            ));
        }
        if !(c.regression.lambda_min > 0.0 && c.regression.lambda_max >= c.regression.lambda_min) {
            return Err(config_err(
                "regression lambda range must be positive and ordered",
            ));
        }
        Ok(())
    }

    /// Corpus files in sorted order; every pattern must match something.
    pub fn corpus_files(&self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for pattern in &self.config.paths.corpus {
            let full = self.resolve(Path::new(pattern));
            let text = full.to_string_lossy().into_owned();
            let matches: Vec<PathBuf> = glob::glob(&text)
                .map_err(|e| config_err(format!("bad corpus pattern {pattern:?}: {e}")))?
                .filter_map(|r| r.ok())
                .filter(|p| p.is_file())
                .collect();
            if matches.is_empty() {
                return Err(config_err(format!(
                    "corpus pattern {pattern:?} matches no file"
                )));
            }
            files.extend(matches);
        }
        files.sort();
        files.dedup();
        Ok(files)
    }

    pub fn output_dir(&self) -> &Path {
        &self.output_dir
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn hash_comment(&self) -> String {
        format!("config_hash={}", self.hash)
    }

    fn vocabs(&self) -> Result<(VocabIndex, VocabIndex)> {
        let (nouns, _) = load_vocab(self.resolve(&self.config.paths.nouns))?;
        let (verbs, _) = load_vocab(self.resolve(&self.config.paths.verbs))?;
        Ok((nouns, verbs))
    }

    fn read_sparse(&self, name: &str) -> Result<SparseMatrix> {
        let (nouns, verbs) = self.vocabs()?;
        let path = self.out(name);
        let reader = crate::io::open(&path)?;
        SparseMatrix::read_tsv(reader, nouns, verbs, &path.display().to_string())
    }

    fn write_sparse(&self, name: &str, m: &SparseMatrix) -> Result<PathBuf> {
        let path = self.out(name);
        atomic_write(&path, |out| m.write_tsv(out, &[self.hash_comment()]))?;
        Ok(path)
    }

    fn read_ppmi(&self) -> Result<PpmiMatrix> {
        let counts = self.read_sparse("counts.tsv")?;
        let matrix = self.read_sparse("ppmi.tsv")?;
        let diagnostics = ppmi(&counts)?.diagnostics;
        Ok(PpmiMatrix {
            matrix,
            diagnostics,
        })
    }

    fn nmf_options(&self) -> NmfOptions {
        let n = &self.config.nmf;
        NmfOptions {
            max_iter: n.max_iter,
            tol: n.tol,
            window: 10,
            init: if n.random_init {
                Init::Random {
                    seed: self.config.seed,
                }
            } else {
                Init::Nndsvd
            },
        }
    }

    fn read_factors(&self) -> Result<(FactorPair, VocabIndex, VocabIndex)> {
        let (nouns, verbs) = self.vocabs()?;
        let o = LabeledMatrix::read_tsv(&self.out("O.tsv"))?;
        let v = LabeledMatrix::read_tsv(&self.out("V.tsv"))?;
        if o.row_labels != nouns.entries() || v.row_labels != verbs.entries() {
            return Err(Error::ShapeMismatch(
                "factor row labels do not match the vocabularies".into(),
            ));
        }
        let meta: FactorMeta = read_json(&self.out("factors.json"))?;
        let fp = FactorPair {
            d: o.values.ncols(),
            o: o.values,
            v: v.values,
            beta: meta.beta,
            seed: meta.seed,
            iterations_run: meta.iterations,
            objective_trace: vec![meta.final_objective],
        };
        Ok((fp, nouns, verbs))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactorMeta {
    config_hash: String,
    d: usize,
    beta: f64,
    seed: u64,
    iterations: usize,
    final_objective: f64,
    initial_objective: f64,
}

/// Counts verb applications over the configured corpus.
pub fn cmd_extract(run: &Run) -> Result<PathBuf> {
    let (nouns, verbs) = run.vocabs()?;
    let mode = run.config.extract.bigrams;
    let files = run.corpus_files()?;
    if files.is_empty() {
        return Err(config_err("no corpus files configured"));
    }
    let partials: Vec<Result<PairCounts>> = files
        .par_iter()
        .map(|f| {
            let mut counts = PairCounts::default();
            for sentence in open_corpus(f)? {
                counts.add_sentence(&sentence?, &nouns, &verbs, mode);
            }
            Ok(counts)
        })
        .collect();
    let mut counts = PairCounts::default();
    for p in partials {
        counts.merge(p?);
    }
    let m = counts.into_matrix(nouns, verbs)?;
    log::info!(
        "extracted {} applications over {} pairs",
        m.total(),
        m.nnz()
    );
    run.write_sparse("counts.tsv", &m)
}

pub fn cmd_ppmi(run: &Run) -> Result<PathBuf> {
    let counts = run.read_sparse("counts.tsv")?;
    let p = ppmi(&counts)?;
    let path = run.write_sparse("ppmi.tsv", &p.matrix)?;
    write_json(
        &run.out("ppmi_diagnostics.json"),
        &json!({
            "config_hash": run.hash,
            "rows": p.matrix.n_rows(),
            "cols": p.matrix.n_cols(),
            "nnz": p.matrix.nnz(),
            "empty_rows": p.diagnostics.empty_rows,
            "empty_cols": p.diagnostics.empty_cols,
        }),
    )?;
    Ok(path)
}

fn dim_labels(d: usize) -> Vec<String> {
    (0..d).map(|h| h.to_string()).collect()
}

pub fn cmd_factorize(run: &Run) -> Result<PathBuf> {
    let p = run.read_sparse("ppmi.tsv")?;
    let n = &run.config.nmf;
    let fp = fit_restarts(
        p.to_dense().view(),
        n.d,
        n.beta,
        n.restarts,
        run.config.seed,
        &run.nmf_options(),
    )?;
    let comments = [run.hash_comment()];
    let o = LabeledMatrix {
        row_labels: p.row_labels().entries().to_vec(),
        col_labels: dim_labels(fp.d),
        values: fp.o.clone(),
    };
    let v = LabeledMatrix {
        row_labels: p.col_labels().entries().to_vec(),
        col_labels: dim_labels(fp.d),
        values: fp.v.clone(),
    };
    atomic_write(&run.out("O.tsv"), |out| o.write_tsv(out, &comments))?;
    atomic_write(&run.out("V.tsv"), |out| v.write_tsv(out, &comments))?;
    let meta = FactorMeta {
        config_hash: run.hash.clone(),
        d: fp.d,
        beta: fp.beta,
        seed: fp.seed,
        iterations: fp.iterations_run,
        final_objective: fp.final_objective(),
        initial_objective: fp.objective_trace[0],
    };
    let path = run.out("factors.json");
    write_json(&path, &meta)?;
    Ok(path)
}

pub fn cmd_cv(run: &Run) -> Result<CvReport> {
    let p = run.read_sparse("ppmi.tsv")?;
    let n = &run.config.nmf;
    let opts = CvOptions {
        k: n.k,
        q: n.q,
        restarts: n.restarts,
        seed: run.config.seed,
        nmf: run.nmf_options(),
    };
    let report = cv_grid(p.to_dense().view(), &n.d_list, &n.beta_list, &opts)?;
    let mut value = serde_json::to_value(&report)?;
    value["config_hash"] = json!(run.hash);
    write_json(&run.out("cv_report.json"), &value)?;
    Ok(report)
}

pub fn cmd_rank(run: &Run) -> Result<PathBuf> {
    let (fp, nouns, verbs) = run.read_factors()?;
    let sim = similarity_matrix(&fp)?;
    let objects: Vec<usize> = match &run.config.rank.objects {
        Some(list) => list
            .iter()
            .map(|o| {
                nouns
                    .lookup(o)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown object {o:?}")))
            })
            .collect::<Result<_>>()?,
        None => (0..nouns.len()).collect(),
    };
    let top_n = run.config.rank.top_n;
    let mut rows = Vec::new();
    for &i in &objects {
        let r = object_verb_ranking(&fp, &sim, i)?;
        for (rank, &k) in r.order.iter().take(top_n).enumerate() {
            rows.push(format!(
                "{}\t{}\t{}\t{}",
                nouns.entries()[i],
                rank + 1,
                verbs.entries()[k],
                fmt_sig(r.scores[k], 12)
            ));
        }
    }
    let path = run.out("rankings.tsv");
    atomic_write(&path, |out| {
        writeln!(out, "#{}", run.hash_comment())?;
        writeln!(out, "object\trank\tverb\tscore")?;
        for r in &rows {
            writeln!(out, "{r}")?;
        }
        Ok(())
    })?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
struct MethodSummary {
    method: String,
    mean: f64,
    objects: usize,
    n: usize,
    skipped: usize,
    /// Paired test of the model against this method on shared objects.
    ttest_vs_model: Option<Value>,
}

fn write_aauc(run: &Run, dataset: &str, method: &str, report: &AaucReport) -> Result<()> {
    let comment = run.hash_comment();
    atomic_write(&run.out(&format!("aauc_{dataset}_{method}.tsv")), |out| {
        writeln!(out, "#{comment}")?;
        writeln!(out, "object\tk\taauc")?;
        for ((o, k), v) in report.objects.iter().zip(&report.ks).zip(&report.values) {
            writeln!(out, "{o}\t{k}\t{}", fmt_sig(*v, 12))?;
        }
        Ok(())
    })?;
    let bins = histogram(&report.values, run.config.eval.histogram_bins);
    atomic_write(
        &run.out(&format!("histogram_{dataset}_{method}.tsv")),
        |out| {
            writeln!(out, "#{comment}")?;
            writeln!(out, "lower\tupper\tcount")?;
            for (lo, hi, c) in &bins {
                writeln!(out, "{}\t{}\t{c}", fmt_sig(*lo, 12), fmt_sig(*hi, 12))?;
            }
            Ok(())
        },
    )
}

fn paired_on_shared(model: &AaucReport, other: &AaucReport) -> Option<Value> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (o, v) in model.objects.iter().zip(&model.values) {
        if let Some(w) = other.value_of(o) {
            a.push(*v);
            b.push(w);
        }
    }
    match paired_ttest(&a, &b) {
        Ok(t) => Some(json!({"t": t.t, "p": t.p, "df": t.df, "pairs": a.len()})),
        Err(e) => Some(json!({"error": e.to_string(), "pairs": a.len()})),
    }
}

/// Evaluates the model and the baselines on every configured dataset.
pub fn cmd_eval(run: &Run) -> Result<PathBuf> {
    let (fp, nouns, verbs) = run.read_factors()?;
    let counts = run.read_sparse("counts.tsv")?;
    let p = run.read_ppmi()?;
    let sim = similarity_matrix(&fp)?;
    if run.config.eval.datasets.is_empty() {
        return Err(config_err("no evaluation datasets configured"));
    }

    let mut scorers: Vec<(String, Box<dyn VerbScorer + '_>)> = vec![
        (
            "model".into(),
            Box::new(ModelScorer {
                factors: &fp,
                similarity: &sim,
            }),
        ),
        ("ppmi".into(), Box::new(PpmiScorer(&p))),
        ("frequency".into(), Box::new(FrequencyScorer::new(&counts))),
    ];
    for b in &run.config.eval.baselines {
        let vectors = WordVectors::read(&run.resolve(&b.path))?;
        let scorer = EmbeddingScorer::new(&vectors, &nouns, &verbs);
        log::info!(
            "{}: {} nouns and {} verbs missing from the vectors",
            b.name,
            scorer.missing_nouns,
            scorer.missing_verbs
        );
        scorers.push((b.name.clone(), Box::new(scorer)));
    }

    let mut summary = BTreeMap::new();
    let mut table: Vec<(String, Vec<f64>)> = Vec::new();
    for ds in &run.config.eval.datasets {
        let rows = read_truth_table(&run.resolve(&ds.path))?;
        let truth = truth_sets(&rows, ds.cutoff);
        let mut reports = Vec::new();
        for (name, scorer) in &scorers {
            let report = evaluate_dataset(scorer.as_ref(), &nouns, &verbs, &truth)?;
            write_aauc(run, &ds.name, name, &report)?;
            reports.push((name.clone(), report));
        }
        let model = reports[0].1.clone();
        let methods: Vec<MethodSummary> = reports
            .iter()
            .map(|(name, r)| MethodSummary {
                method: name.clone(),
                mean: r.mean,
                objects: r.values.len(),
                n: r.n,
                skipped: r.skipped,
                ttest_vs_model: (name != "model")
                    .then(|| paired_on_shared(&model, r))
                    .flatten(),
            })
            .collect();
        table.push((
            ds.name.clone(),
            reports.iter().map(|(_, r)| r.mean).collect(),
        ));
        summary.insert(
            ds.name.clone(),
            json!({
                "truth_objects": truth.len(),
                "labels_per_object": model.ks.iter().sum::<usize>() as f64 / model.ks.len() as f64,
                "methods": methods,
            }),
        );
    }

    let method_names: Vec<&str> = scorers.iter().map(|(n, _)| n.as_str()).collect();
    atomic_write(&run.out("aauc_table.tsv"), |out| {
        writeln!(out, "#{}", run.hash_comment())?;
        writeln!(out, "dataset\t{}", method_names.join("\t"))?;
        for (ds, means) in &table {
            let cells: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
            writeln!(out, "{ds}\t{}", cells.join("\t"))?;
        }
        Ok(())
    })?;
    let path = run.out("aauc_summary.json");
    write_json(
        &path,
        &json!({"config_hash": run.hash, "datasets": summary}),
    )?;
    Ok(path)
}

/// Regresses every target dimension on the embedding.
pub fn cmd_regress(run: &Run) -> Result<PathBuf> {
    let (fp, nouns, verbs) = run.read_factors()?;
    let p = run.read_ppmi()?;
    let target_path = run
        .config
        .paths
        .targets
        .as_ref()
        .ok_or_else(|| config_err("paths.targets is not set"))?;
    let raw = read_target_table(&run.resolve(target_path))?;
    let (targets, stats) = align_targets(&raw, &nouns, &p)?;
    let o = fp.o.select(Axis(0), &targets.noun_ids);
    let r = &run.config.regression;
    let opts = RegressionOptions {
        grid: lambda_grid(r.lambda_min, r.lambda_max, r.grid_size),
        folds: r.folds,
        seed: r.seed.unwrap_or(run.config.seed),
        lasso: LassoOptions::default(),
    };
    let fit = fit_all_dims(o.view(), &targets, &opts)?;
    let best = best_match_correlation(targets.y.view(), o.view())?;
    let assignment = spose_verb_assignment(fit.yhat_matrix().view(), o.view(), fp.v.view())?;

    let top_verbs = |h: usize| -> Vec<String> {
        assignment[h]
            .as_ref()
            .map(|rk| {
                rk.order
                    .iter()
                    .take(r.top_verbs)
                    .map(|&k| verbs.entries()[k].clone())
                    .collect()
            })
            .unwrap_or_default()
    };

    let dims: Vec<Value> = fit
        .dims
        .iter()
        .enumerate()
        .map(|(h, d)| {
            json!({
                "label": d.label,
                "weights": d.w.to_vec(),
                "lambda_star": d.lambda_star,
                "pearson_r": d.oof.r,
                "p_value": d.oof.p,
                "refit_r": d.refit.r,
                "refit_p": d.refit.p,
                "converged": d.converged,
                "contributions": d.contributions,
                "best_match_dim": best[h].dim,
                "best_match_r": best[h].r,
                "top_verbs": top_verbs(h),
                "cv_curve": d.cv_curve,
            })
        })
        .collect();
    let path = run.out("regression.json");
    write_json(
        &path,
        &json!({
            "config_hash": run.hash,
            "objects": targets.objects.len(),
            "alignment": stats,
            "verbs_with_observations": p.matrix.n_cols() - p.diagnostics.empty_cols.len(),
            "dimensions": dims,
        }),
    )?;

    let mut order: Vec<usize> = (0..fit.dims.len()).collect();
    order.sort_by(|&a, &b| {
        fit.dims[b]
            .oof
            .r
            .total_cmp(&fit.dims[a].oof.r)
            .then(a.cmp(&b))
    });
    atomic_write(&run.out("regression_summary.tsv"), |out| {
        writeln!(out, "#{}", run.hash_comment())?;
        writeln!(
            out,
            "pearson_r\tp_value\tdimension\tbest_match_dim\tbest_match_r\ttop_verbs"
        )?;
        for &h in &order {
            let d = &fit.dims[h];
            writeln!(
                out,
                "{:.2}\t{}\t{}\t{}\t{:.2}\t{}",
                d.oof.r,
                fmt_sig(d.oof.p, 3),
                d.label,
                best[h].dim,
                best[h].r,
                top_verbs(h).join(", ")
            )?;
        }
        Ok(())
    })?;
    Ok(path)
}

fn read_optional_json(path: &Path) -> Result<Option<Value>> {
    if path.is_file() {
        Ok(Some(read_json(path)?))
    } else {
        Ok(None)
    }
}

fn copy_tsv_body(from: &Path, to: &Path, comment: &str) -> Result<bool> {
    if !from.is_file() {
        return Ok(false);
    }
    let text = fs::read_to_string(from).map_err(|e| Error::io(from, e))?;
    atomic_write(to, |out| {
        writeln!(out, "#{comment}")?;
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            writeln!(out, "{line}")?;
        }
        Ok(())
    })?;
    Ok(true)
}

/// Gathers every artifact present in the run directory into one report.
pub fn cmd_report(run: &Run) -> Result<PathBuf> {
    let mut report = serde_json::Map::new();
    report.insert("config_hash".into(), json!(run.hash));
    report.insert("config".into(), serde_json::to_value(&run.config)?);
    if run.out("counts.tsv").is_file() {
        let counts = run.read_sparse("counts.tsv")?;
        report.insert(
            "counts".into(),
            json!({"rows": counts.n_rows(), "cols": counts.n_cols(), "nnz": counts.nnz(), "total": counts.total()}),
        );
    }
    for (key, file) in [
        ("ppmi", "ppmi_diagnostics.json"),
        ("factors", "factors.json"),
        ("aauc", "aauc_summary.json"),
    ] {
        if let Some(v) = read_optional_json(&run.out(file))? {
            report.insert(key.into(), v);
        }
    }
    if let Some(cv) = read_optional_json(&run.out("cv_report.json"))? {
        report.insert(
            "cv".into(),
            json!({"selected": cv["selected"], "k": cv["k"], "q": cv["q"], "restarts": cv["restarts"]}),
        );
    }
    if let Some(reg) = read_optional_json(&run.out("regression.json"))? {
        let rows: Vec<Value> = reg["dimensions"]
            .as_array()
            .map(|dims| {
                dims.iter()
                    .map(|d| json!({"label": d["label"], "pearson_r": d["pearson_r"], "p_value": d["p_value"], "top_verbs": d["top_verbs"]}))
                    .collect()
            })
            .unwrap_or_default();
        report.insert(
            "regression".into(),
            json!({"objects": reg["objects"], "dimensions": rows}),
        );
    }
    let comment = run.hash_comment();
    copy_tsv_body(
        &run.out("aauc_table.tsv"),
        &run.out("report_aauc.tsv"),
        &comment,
    )?;
    copy_tsv_body(
        &run.out("regression_summary.tsv"),
        &run.out("report_regression.tsv"),
        &comment,
    )?;
    let path = run.out("report.json");
    write_json(&path, &Value::Object(report))?;
    Ok(path)
}

/// `extract -> ppmi -> factorize -> rank`, then `eval` and `regress` when
/// configured, then `report`.
pub fn cmd_all(run: &Run) -> Result<PathBuf> {
    cmd_extract(run)?;
    cmd_ppmi(run)?;
    cmd_factorize(run)?;
    cmd_rank(run)?;
    if !run.config.eval.datasets.is_empty() {
        cmd_eval(run)?;
    }
    if run.config.paths.targets.is_some() {
        cmd_regress(run)?;
    }
    cmd_report(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dir: &Path) -> RunConfig {
        fs::write(dir.join("n.txt"), "cup\n").unwrap();
        fs::write(dir.join("v.txt"), "fill\n").unwrap();
        RunConfig::from_json(
            r#"{"format_version":"1","seed":3,
                "paths":{"nouns":"n.txt","verbs":"v.txt","output_dir":"out"}}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path());
        assert_eq!(cfg.nmf.d, 70);
        assert_eq!(cfg.nmf.beta, 0.3);
        assert_eq!(cfg.nmf.k, 10);
        assert_eq!(cfg.regression.grid_size, 50);
        let mut other = cfg.clone();
        other.paths.output_dir = "elsewhere".into();
        assert_eq!(cfg.hash(), other.hash());
        other.seed = 4;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn seed_is_required() {
        let err = RunConfig::from_json(
            r#"{"format_version":"1","paths":{"nouns":"n","verbs":"v","output_dir":"o"}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path());
        let run = Run::new(cfg.clone(), dir.path().into(), &Overrides::default()).unwrap();
        assert!(run.output_dir().ends_with("out"));

        let mut bad = cfg.clone();
        bad.paths.targets = Some("missing.tsv".into());
        assert!(matches!(
            Run::new(bad, dir.path().into(), &Overrides::default()),
            Err(Error::Config(_))
        ));

        let mut bad = cfg.clone();
        bad.paths.corpus = vec!["*.conllu".into()];
        assert!(Run::new(bad, dir.path().into(), &Overrides::default()).is_err());

        let mut bad = cfg;
        bad.nmf.q = bad.nmf.k;
        assert!(Run::new(bad, dir.path().into(), &Overrides::default()).is_err());
    }

    #[test]
    fn overrides_apply() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path());
        let run = Run::new(
            cfg.clone(),
            dir.path().into(),
            &Overrides {
                seed: Some(9),
                d: Some(4),
                beta: Some(0.1),
                output_dir: Some(dir.path().join("x")),
            },
        )
        .unwrap();
        assert_eq!(run.config.seed, 9);
        assert_eq!(run.config.nmf.d, 4);
        assert_ne!(run.hash, cfg.hash());
        assert_eq!(run.output_dir(), dir.path().join("x"));
    }
}
