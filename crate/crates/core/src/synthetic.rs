//! Planted-structure generators for tests, benchmarks and demos.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::rng;

fn sparse_factor(rows: usize, d: usize, density: f64, r: &mut ChaCha8Rng) -> Array2<f64> {
    let mut f = Array2::zeros((rows, d));
    for i in 0..rows {
        for h in 0..d {
            if r.random::<f64>() < density {
                f[[i, h]] = 1.0 + r.random::<f64>();
            }
        }
        if f.row(i).iter().all(|&x| x == 0.0) {
            let h = r.random_range(0..d);
            f[[i, h]] = 1.0 + r.random::<f64>();
        }
    }
    f
}

fn standard_normal(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A low-rank non-negative matrix with absolute Gaussian noise.
#[derive(Debug, Clone)]
pub struct PlantedFactorization {
    pub p: Array2<f64>,
    pub o: Array2<f64>,
    pub v: Array2<f64>,
}

/// `P = O* V*^T + |N(0, noise_sd^2)|` with sparse factors whose non-zero
/// entries are uniform in `[1, 2)`; every row of each factor has at least
/// one non-zero.
pub fn planted_factorization(
    m: usize,
    n: usize,
    d: usize,
    density: f64,
    noise_sd: f64,
    seed: u64,
) -> PlantedFactorization {
    let mut r = rng(seed);
    let o = sparse_factor(m, d, density, &mut r);
    let v = sparse_factor(n, d, density, &mut r);
    let mut p = o.dot(&v.t());
    p.mapv_inplace(|x| x + (noise_sd * standard_normal(&mut r)).abs());
    PlantedFactorization { p, o, v }
}

/// Non-negative count matrix where each object draws its verbs mostly from
/// the verb block of one "active" dimension, plus background verbs that
/// are frequent overall but not specific to any object.
#[derive(Debug, Clone)]
pub struct PlantedAffordances {
    pub counts: Array2<f64>,
    /// Active dimension of each object.
    pub object_dim: Vec<usize>,
    /// Verbs belonging to each dimension.
    pub dim_verbs: Vec<Vec<usize>>,
    /// Globally frequent verbs shared by all objects.
    pub background: Vec<usize>,
}

/// Generates `m` objects over `n` verbs with `d` dimensions of
/// `verbs_per_dim` verbs each; the remaining verbs split into frequent
/// background verbs and rare noise verbs.
pub fn planted_affordances(
    m: usize,
    n: usize,
    d: usize,
    verbs_per_dim: usize,
    n_background: usize,
    seed: u64,
) -> PlantedAffordances {
    assert!(d * verbs_per_dim + n_background <= n, "not enough verbs");
    let mut r = rng(seed);
    let mut verbs: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(verbs.as_mut_slice(), &mut r);
    let dim_verbs: Vec<Vec<usize>> = (0..d)
        .map(|h| verbs[h * verbs_per_dim..(h + 1) * verbs_per_dim].to_vec())
        .collect();
    let background = verbs[d * verbs_per_dim..d * verbs_per_dim + n_background].to_vec();
    let noise_verbs = verbs[d * verbs_per_dim + n_background..].to_vec();

    let mut counts = Array2::zeros((m, n));
    let object_dim: Vec<usize> = (0..m).map(|i| i % d).collect();
    for i in 0..m {
        let h = object_dim[i];
        for &k in &dim_verbs[h] {
            if r.random::<f64>() < 0.8 {
                counts[[i, k]] += f64::from(r.random_range(2..12u32));
            }
        }
        for &k in &background {
            counts[[i, k]] += f64::from(r.random_range(5..20u32));
        }
        for &k in &noise_verbs {
            if r.random::<f64>() < 0.05 {
                counts[[i, k]] += 1.0;
            }
        }
    }
    PlantedAffordances {
        counts,
        object_dim,
        dim_verbs,
        background,
    }
}

/// A target matrix built as non-negative mixtures of embedding columns.
#[derive(Debug, Clone)]
pub struct PlantedMixture {
    pub o: Array2<f64>,
    pub y: Array2<f64>,
    /// True mixing weights, `d x targets`.
    pub w: Array2<f64>,
}

/// Embedding `o` (`m x d`, sparse non-negative) and `targets` columns each
/// mixing `active` distinct embedding columns with weights in `[0.5, 1.5)`,
/// plus absolute Gaussian noise of scale `noise_sd`.
pub fn planted_mixture(
    m: usize,
    d: usize,
    targets: usize,
    active: usize,
    noise_sd: f64,
    seed: u64,
) -> PlantedMixture {
    let mut r = rng(seed);
    let o = sparse_factor(m, d, 0.3, &mut r);
    let mut w = Array2::zeros((d, targets));
    for t in 0..targets {
        let chosen = rand::seq::index::sample(&mut r, d, active.min(d));
        for h in chosen {
            w[[h, t]] = 0.5 + r.random::<f64>();
        }
    }
    let mut y = o.dot(&w);
    y.mapv_inplace(|x| x + (noise_sd * standard_normal(&mut r)).abs());
    PlantedMixture { o, y, w }
}

/// Renders integer counts as CoNLL-U: each application becomes a
/// three-token sentence `verb the noun` with the noun as direct object.
pub fn conllu_from_counts(counts: &Array2<f64>, nouns: &[String], verbs: &[String]) -> String {
    let mut out = String::new();
    for ((i, k), &c) in counts.indexed_iter() {
        for _ in 0..c.round() as usize {
            out.push_str(&format!(
                "1\t{v}\t{v}\tVERB\t_\t_\t0\troot\t_\t_\n\
                 2\tthe\tthe\tDET\t_\t_\t3\tdet\t_\t_\n\
                 3\t{n}\t{n}\tNOUN\t_\t_\t1\tobj\t_\t_\n\n",
                v = verbs[k],
                n = nouns[i]
            ));
        }
    }
    out
}
