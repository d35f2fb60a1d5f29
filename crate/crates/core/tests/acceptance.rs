//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use afford_core::nmf::{
    cv_grid, fit_restarts, make_block_masks, masked_nmf, CvOptions, Init, NmfOptions,
};
use afford_core::pipeline::{cmd_all, Overrides, Run};
use afford_core::ppmi::ppmi;
use afford_core::ranking::{
    aauc, evaluate_dataset, similarity_matrix, FrequencyScorer, ModelScorer, PpmiScorer,
    VerbRanking, VerbScorer,
};
use afford_core::regression::{
    best_match_correlation, fit_all_dims, kkt_violation, nonneg_lasso, LassoOptions,
    RegressionOptions, TargetMatrix,
};
use afford_core::rng::rng;
use afford_core::sparse::SparseMatrix;
use afford_core::synthetic::{planted_affordances, planted_factorization, planted_mixture};
use afford_core::vocab::VocabIndex;
use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn labels(prefix: &str, n: usize) -> VocabIndex {
    VocabIndex::from_entries((0..n).map(|i| format!("{prefix}{i}"))).0
}

fn sparse(counts: &Array2<f64>) -> SparseMatrix {
    let (m, n) = counts.dim();
    SparseMatrix::from_triplets(
        labels("n", m),
        labels("v", n),
        counts
            .indexed_iter()
            .filter(|(_, &c)| c > 0.0)
            .map(|((i, k), &c)| (i, k, c)),
    )
    .unwrap()
}

fn brute_force_ppmi(c: &Array2<f64>) -> Array2<f64> {
    let total = c.sum();
    let rows = c.sum_axis(Axis(1));
    let cols = c.sum_axis(Axis(0));
    Array2::from_shape_fn(c.dim(), |(i, k)| {
        if c[[i, k]] == 0.0 {
            return 0.0;
        }
        let pik = c[[i, k]] / total;
        let pmi = (pik / ((rows[i] / total) * (cols[k] / total))).ln();
        pmi.max(0.0)
    })
}

fn ppmi_oracle() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 100 {
        let m = r.random_range(1..=30);
        let n = r.random_range(1..=40);
        let c = Array2::from_shape_fn((m, n), |_| f64::from(r.random_range(0..=9u32)));
        if c.sum() == 0.0 {
            continue;
        }
        tested += 1;
        let got = ppmi(&sparse(&c))
            .map_err(|e| e.to_string())?
            .matrix
            .to_dense();
        let want = brute_force_ppmi(&c);
        worst = worst.max((&got - &want).mapv(f64::abs).fold(0.0, |a, &b| a.max(b)));
    }
    if worst <= 1e-12 {
        Ok(format!("100 matrices, max |diff| = {worst:.1e}"))
    } else {
        Err(format!("max |diff| = {worst:.3e} > 1e-12"))
    }
}

fn nmf_monotone() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for seed in 0..10u64 {
        let mut r = rng(100 + seed);
        let p = Array2::from_shape_fn((50, 80), |_| r.random::<f64>() * 3.0);
        let mask = make_block_masks(50, 80, 5, 1, seed).map_err(|e| e.to_string())?;
        for beta in [0.0, 0.3, 1.0] {
            for m in [None, Some(&mask)] {
                let opts = NmfOptions {
                    max_iter: 500,
                    tol: 0.0,
                    init: Init::Random { seed },
                    ..Default::default()
                };
                let fp = masked_nmf(p.view(), m, 8, beta, &opts).map_err(|e| e.to_string())?;
                if fp.objective_trace.len() != 501 {
                    return Err(format!("trace length {}", fp.objective_trace.len()));
                }
                for w in fp.objective_trace.windows(2) {
                    worst = worst.max(w[1] - w[0]);
                }
                runs += 1;
            }
        }
    }
    if worst <= 1e-9 {
        Ok(format!(
            "{runs} runs x 500 iterations, largest step increase {worst:.1e}"
        ))
    } else {
        Err(format!("objective rose by {worst:.3e} > 1e-9"))
    }
}

fn planted_rank() -> Outcome {
    let d_list: Vec<usize> = (2..=10).collect();
    let mut hits = 0;
    let mut picks = Vec::new();
    for seed in 0..10u64 {
        let pf = planted_factorization(120, 160, 5, 0.3, 0.1, seed);
        let opts = CvOptions {
            k: 5,
            q: 1,
            restarts: 3,
            seed,
            nmf: NmfOptions {
                max_iter: 500,
                ..Default::default()
            },
        };
        let report =
            cv_grid(pf.p.view(), &d_list, &[0.1, 0.3], &opts).map_err(|e| e.to_string())?;
        let d = report.selected.0;
        picks.push(d);
        if (4..=6).contains(&d) {
            hits += 1;
        }
    }
    let detail = format!("selected d per seed {picks:?}, {hits}/10 in {{4,5,6}}");
    if hits >= 8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn aauc_sanity() -> Outcome {
    let mut r = rng(4);
    let (n, k, trials) = (100, 5, 1000);
    let mut total = 0.0;
    for _ in 0..trials {
        let scores: Vec<f64> = (0..n).map(|_| r.random()).collect();
        let ranking = VerbRanking::from_scores(0, scores);
        let truth: BTreeSet<usize> = sample(&mut r, n, k).into_iter().collect();
        total += aauc(&ranking, &truth).map_err(|e| e.to_string())?;
    }
    let random_mean = total / trials as f64;

    let (m, n, d) = (200, 300, 20);
    let planted = planted_affordances(m, n, d, 8, 20, 4);
    let nouns = labels("n", m);
    let verbs = labels("v", n);
    let counts = sparse(&planted.counts);
    let p = ppmi(&counts).map_err(|e| e.to_string())?;
    let fp = fit_restarts(
        p.matrix.to_dense().view(),
        d,
        0.1,
        3,
        4,
        &NmfOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let sim = similarity_matrix(&fp).map_err(|e| e.to_string())?;
    let truth = (0..m)
        .map(|i| {
            let set = planted.dim_verbs[planted.object_dim[i]]
                .iter()
                .map(|&k| verbs.entries()[k].clone())
                .collect();
            (nouns.entries()[i].clone(), set)
        })
        .collect();
    let mean = |s: &dyn VerbScorer| {
        evaluate_dataset(s, &nouns, &verbs, &truth)
            .map(|r| r.mean)
            .map_err(|e| e.to_string())
    };
    let model = mean(&ModelScorer {
        factors: &fp,
        similarity: &sim,
    })?;
    let ppmi_row = mean(&PpmiScorer(&p))?;
    let freq = mean(&FrequencyScorer::new(&counts))?;

    let detail = format!(
        "random {random_mean:.4}; planted model {model:.4}, ppmi-row {ppmi_row:.4}, frequency {freq:.4}"
    );
    if (random_mean - 0.5).abs() <= 0.02 && model >= 0.90 && freq <= 0.75 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lasso_correctness() -> Outcome {
    let opts = LassoOptions::default();
    let mut r = rng(5);
    let mut worst_kkt = 0.0f64;
    for _ in 0..200 {
        let m = r.random_range(10..60);
        let d = r.random_range(2..15);
        let x = Array2::from_shape_fn((m, d), |_| {
            if r.random::<f64>() < 0.4 {
                r.random::<f64>() * 2.0
            } else {
                0.0
            }
        });
        let y = Array1::from_shape_fn(m, |_| r.random::<f64>() * 3.0);
        let lambda = 10f64.powf(r.random_range(-4.0..1.0));
        let fit = nonneg_lasso(x.view(), y.view(), lambda, &opts).map_err(|e| e.to_string())?;
        worst_kkt = worst_kkt.max(kkt_violation(x.view(), y.view(), fit.w.view(), lambda));
    }

    let mut null_ok = true;
    for seed in 0..20u64 {
        let mut r = rng(500 + seed);
        let x = Array2::from_shape_fn((40, 6), |_| r.random::<f64>());
        let y = Array1::from_shape_fn(40, |_| r.random::<f64>());
        let threshold = x.t().dot(&y).fold(0.0f64, |a, &b| a.max(b)) / 40.0;
        let fit = nonneg_lasso(x.view(), y.view(), threshold, &opts).map_err(|e| e.to_string())?;
        null_ok &= fit.w.iter().all(|&w| w == 0.0);
    }

    let mut min_r = f64::INFINITY;
    for seed in 0..5u64 {
        let pm = planted_mixture(120, 12, 4, 3, 0.0, seed);
        let targets = TargetMatrix {
            y: pm.y.clone(),
            noun_ids: (0..120).collect(),
            objects: (0..120).map(|i| i.to_string()).collect(),
            dim_labels: (0..4).map(|t| t.to_string()).collect(),
        };
        let fit = fit_all_dims(pm.o.view(), &targets, &RegressionOptions::default())
            .map_err(|e| e.to_string())?;
        for dfit in &fit.dims {
            min_r = min_r.min(dfit.pearson_r());
        }
    }

    let detail = format!(
        "max KKT residual {worst_kkt:.1e} over 200 instances; null threshold gives w = 0: {null_ok}; min out-of-fold r {min_r:.5}"
    );
    if worst_kkt <= 1e-6 && null_ok && min_r > 0.99 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn regression_over_best_match() -> Outcome {
    let mut violations = 0;
    let mut dims = 0;
    let mut margin = f64::INFINITY;
    for seed in 0..20u64 {
        let pm = planted_mixture(100, 20, 5, 3, 0.1, 600 + seed);
        let targets = TargetMatrix {
            y: pm.y.clone(),
            noun_ids: (0..100).collect(),
            objects: (0..100).map(|i| i.to_string()).collect(),
            dim_labels: (0..5).map(|t| t.to_string()).collect(),
        };
        let opts = RegressionOptions {
            seed,
            ..Default::default()
        };
        let fit = fit_all_dims(pm.o.view(), &targets, &opts).map_err(|e| e.to_string())?;
        let best = best_match_correlation(pm.y.view(), pm.o.view()).map_err(|e| e.to_string())?;
        for (dfit, b) in fit.dims.iter().zip(&best) {
            dims += 1;
            margin = margin.min(dfit.pearson_r() - b.r);
            if dfit.pearson_r() < b.r {
                violations += 1;
            }
        }
    }
    let detail =
        format!("{dims} dimensions, {violations} below best match, min margin {margin:.4}");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let p = common::project(11);
    let mut snapshots = Vec::new();
    for name in ["first", "second"] {
        let overrides = Overrides {
            output_dir: Some(p.path(name)),
            ..Default::default()
        };
        let run = Run::load(&p.config, &overrides).map_err(|e| e.to_string())?;
        cmd_all(&run).map_err(|e| e.to_string())?;
        snapshots.push(common::read_dir_bytes(&p.path(name)));
    }
    if snapshots[0].is_empty() {
        return Err("no artifacts written".into());
    }
    if snapshots[0] == snapshots[1] {
        Ok(format!("{} artifacts byte-identical", snapshots[0].len()))
    } else {
        let differing: Vec<&str> = snapshots[0]
            .iter()
            .zip(&snapshots[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        Err(format!("artifacts differ: {differing:?}"))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            "1 ppmi oracle equivalence",
            Duration::from_secs(5),
            ppmi_oracle,
        ),
        ("2 nmf monotonicity", Duration::from_secs(60), nmf_monotone),
        (
            "3 planted-rank recovery",
            Duration::from_secs(600),
            planted_rank,
        ),
        ("4 aauc sanity", Duration::from_secs(120), aauc_sanity),
        (
            "5 non-negative lasso",
            Duration::from_secs(60),
            lasso_correctness,
        ),
        (
            "6 regression over best match",
            Duration::from_secs(60),
            regression_over_best_match,
        ),
        ("7 end-to-end determinism", Duration::MAX, determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over time budget {budget:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} criterion {name}: {detail} ({:.1}s)",
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
