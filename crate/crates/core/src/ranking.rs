//! Verb rankings for objects and their evaluation against ground truth.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{TruthRow, WordVectors};
use crate::nmf::FactorPair;
use crate::ppmi::PpmiMatrix;
use crate::sparse::SparseMatrix;
use crate::vocab::VocabIndex;

/// Cosine similarity between each embedding dimension and each verb column
/// of the reconstruction `O V^T`, shape `d x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub s: Array2<f64>,
    /// Dimensions whose column of `O` is all zero; their rows of `s` are 0.
    pub zero_dims: Vec<usize>,
}

/// `S[h, k] = cos(Y[:, h], (O V^T)[:, k])`, shape `h x n`.
///
/// The reconstruction is never materialized: `Y^T O V^T` and the column
/// norms `sqrt(v_k^T (O^T O) v_k)` only need `d x d` Gram matrices.
pub fn cosine_scores(
    y: ArrayView2<f64>,
    o: ArrayView2<f64>,
    v: ArrayView2<f64>,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if y.nrows() != o.nrows() || o.ncols() != v.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "Y {:?}, O {:?}, V {:?}",
            y.dim(),
            o.dim(),
            v.dim()
        )));
    }
    let gram = o.t().dot(&o);
    let cross = y.t().dot(&o).dot(&v.t());
    let col_norm: Array1<f64> = v
        .rows()
        .into_iter()
        .map(|vk| vk.dot(&gram.dot(&vk)).max(0.0).sqrt())
        .collect();
    let y_norm: Vec<f64> = y.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let zero_dims: Vec<usize> = (0..y.ncols()).filter(|&h| y_norm[h] == 0.0).collect();
    let mut s = cross;
    for ((h, k), x) in s.indexed_iter_mut() {
        let denom = y_norm[h] * col_norm[k];
        *x = if denom > 0.0 {
            (*x / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        };
    }
    Ok((s, zero_dims))
}

pub fn similarity_matrix(fp: &FactorPair) -> Result<SimilarityMatrix> {
    let (s, zero_dims) = cosine_scores(fp.o.view(), fp.o.view(), fp.v.view())?;
    if !zero_dims.is_empty() {
        log::warn!("{} all-zero embedding dimensions", zero_dims.len());
    }
    Ok(SimilarityMatrix { s, zero_dims })
}

/// Verbs ordered by descending score; ties go to the lower verb index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerbRanking {
    pub object_id: usize,
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
}

impl VerbRanking {
    pub fn from_scores(object_id: usize, scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        VerbRanking {
            object_id,
            scores,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// 1-based rank of every verb.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (rank, &verb) in self.order.iter().enumerate() {
            pos[verb] = rank + 1;
        }
        pos
    }
}

fn check_row(i: usize, m: usize) -> Result<()> {
    if i >= m {
        return Err(Error::OutOfRange { index: i, len: m });
    }
    Ok(())
}

/// Scores `O[i, :] S`.
pub fn object_verb_ranking(
    fp: &FactorPair,
    sim: &SimilarityMatrix,
    i: usize,
) -> Result<VerbRanking> {
    check_row(i, fp.o.nrows())?;
    if sim.s.nrows() != fp.o.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "S has {} rows, O has {} columns",
            sim.s.nrows(),
            fp.o.ncols()
        )));
    }
    let scores = fp.o.row(i).dot(&sim.s);
    Ok(VerbRanking::from_scores(i, scores.to_vec()))
}

/// Ranks verbs by the object's row of the PPMI matrix.
pub fn ppmi_row_ranking(p: &PpmiMatrix, i: usize) -> Result<VerbRanking> {
    check_row(i, p.matrix.n_rows())?;
    let mut scores = vec![0.0; p.matrix.n_cols()];
    for (k, v) in p.matrix.row(i) {
        scores[k] = v;
    }
    Ok(VerbRanking::from_scores(i, scores))
}

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    (na > 0.0 && nb > 0.0).then(|| a.dot(&b) / (na * nb))
}

/// Ranks verbs by cosine similarity to the noun vector. Zero-norm verb
/// vectors score negative infinity.
pub fn baseline_cosine_ranking(
    noun_vector: ArrayView1<f64>,
    verb_vectors: ArrayView2<f64>,
) -> Result<VerbRanking> {
    if verb_vectors.ncols() != noun_vector.len() {
        return Err(Error::ShapeMismatch(format!(
            "noun vector has {} components, verb vectors {}",
            noun_vector.len(),
            verb_vectors.ncols()
        )));
    }
    if noun_vector.dot(&noun_vector) <= 0.0 {
        return Err(Error::InvalidArgument("zero-norm noun vector".into()));
    }
    let scores = verb_vectors
        .rows()
        .into_iter()
        .map(|v| cosine(noun_vector, v).unwrap_or(f64::NEG_INFINITY))
        .collect();
    Ok(VerbRanking::from_scores(0, scores))
}

/// `(1/K) sum_k (1 - l_k / n)` with `l_k` the 1-based rank of truth verb `k`.
pub fn aauc(ranking: &VerbRanking, truth: &BTreeSet<usize>) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    let n = ranking.len();
    let pos = ranking.positions();
    let mut acc = 0.0;
    for &g in truth {
        if g >= n {
            return Err(Error::OutOfRange { index: g, len: n });
        }
        acc += 1.0 - pos[g] as f64 / n as f64;
    }
    Ok(acc / truth.len() as f64)
}

/// Something that scores every verb of the vocabulary for a noun.
pub trait VerbScorer: Sync {
    /// Scores over the full verb vocabulary, or `None` if the scorer has
    /// no representation for the noun.
    fn scores(&self, noun: usize) -> Option<Vec<f64>>;
}

/// The factorization model: `O[i, :] S`.
pub struct ModelScorer<'a> {
    pub factors: &'a FactorPair,
    pub similarity: &'a SimilarityMatrix,
}

impl VerbScorer for ModelScorer<'_> {
    fn scores(&self, noun: usize) -> Option<Vec<f64>> {
        object_verb_ranking(self.factors, self.similarity, noun)
            .ok()
            .map(|r| r.scores)
    }
}

/// Rows of the PPMI matrix.
pub struct PpmiScorer<'a>(pub &'a PpmiMatrix);

impl VerbScorer for PpmiScorer<'_> {
    fn scores(&self, noun: usize) -> Option<Vec<f64>> {
        ppmi_row_ranking(self.0, noun).ok().map(|r| r.scores)
    }
}

/// Verb frequency in the count matrix, the same for every noun.
pub struct FrequencyScorer {
    pub totals: Vec<f64>,
}

impl FrequencyScorer {
    pub fn new(counts: &SparseMatrix) -> Self {
        FrequencyScorer {
            totals: counts.col_sums(),
        }
    }
}

impl VerbScorer for FrequencyScorer {
    fn scores(&self, _noun: usize) -> Option<Vec<f64>> {
        Some(self.totals.clone())
    }
}

/// Cosine similarity between external word vectors of nouns and verbs.
pub struct EmbeddingScorer {
    noun_rows: Vec<Option<Array1<f64>>>,
    verb_matrix: Array2<f64>,
    pub missing_nouns: usize,
    pub missing_verbs: usize,
}

impl EmbeddingScorer {
    pub fn new(vectors: &WordVectors, nouns: &VocabIndex, verbs: &VocabIndex) -> Self {
        let dim = vectors.vectors.ncols();
        let noun_rows: Vec<_> = nouns
            .entries()
            .iter()
            .map(|t| vectors.get(t).map(|v| v.to_owned()))
            .collect();
        let mut verb_matrix = Array2::zeros((verbs.len(), dim));
        let mut missing_verbs = 0;
        for (k, t) in verbs.entries().iter().enumerate() {
            match vectors.get(t) {
                Some(v) => verb_matrix.row_mut(k).assign(&v),
                None => missing_verbs += 1,
            }
        }
        let missing_nouns = noun_rows.iter().filter(|r| r.is_none()).count();
        EmbeddingScorer {
            noun_rows,
            verb_matrix,
            missing_nouns,
            missing_verbs,
        }
    }
}

impl VerbScorer for EmbeddingScorer {
    fn scores(&self, noun: usize) -> Option<Vec<f64>> {
        let v = self.noun_rows.get(noun)?.as_ref()?;
        baseline_cosine_ranking(v.view(), self.verb_matrix.view())
            .ok()
            .map(|r| r.scores)
    }
}

/// Ground-truth verb sets per object. Rows carrying a score are kept only
/// when the score reaches `cutoff`.
pub fn truth_sets(rows: &[TruthRow], cutoff: Option<f64>) -> BTreeMap<String, BTreeSet<String>> {
    let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for row in rows {
        let keep = match (row.score, cutoff) {
            (Some(s), Some(c)) => s >= c,
            _ => true,
        };
        if keep {
            sets.entry(row.object.clone())
                .or_default()
                .insert(row.verb.clone());
        }
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AaucReport {
    pub objects: Vec<String>,
    pub values: Vec<f64>,
    /// Number of truth verbs per object after restriction.
    pub ks: Vec<usize>,
    /// Length of every ranking (restricted verb count).
    pub n: usize,
    pub mean: f64,
    /// Objects in the intersection the scorer could not score.
    pub skipped: usize,
}

impl AaucReport {
    pub fn value_of(&self, object: &str) -> Option<f64> {
        self.objects
            .iter()
            .position(|o| o == object)
            .map(|i| self.values[i])
    }
}

/// Restricts objects and verbs to the vocabularies, ranks the restricted
/// verbs for each object and computes its AAUC.
pub fn evaluate_dataset(
    scorer: &dyn VerbScorer,
    nouns: &VocabIndex,
    verbs: &VocabIndex,
    truth: &BTreeMap<String, BTreeSet<String>>,
) -> Result<AaucReport> {
    let dataset_verbs: BTreeSet<&String> = truth.values().flatten().collect();
    let verb_ids: Vec<usize> = {
        let mut ids: Vec<usize> = dataset_verbs
            .iter()
            .filter_map(|v| verbs.id_of(v))
            .collect();
        ids.sort_unstable();
        ids
    };
    let local: BTreeMap<usize, usize> = verb_ids.iter().enumerate().map(|(l, &g)| (g, l)).collect();

    let mut objects: Vec<(usize, &String, BTreeSet<usize>)> = truth
        .iter()
        .filter_map(|(obj, vs)| {
            let i = nouns.id_of(obj)?;
            let set: BTreeSet<usize> = vs
                .iter()
                .filter_map(|v| verbs.id_of(v).map(|g| local[&g]))
                .collect();
            (!set.is_empty()).then_some((i, obj, set))
        })
        .collect();
    objects.sort_by_key(|(i, _, _)| *i);

    if verb_ids.is_empty() || objects.is_empty() {
        return Err(Error::EmptyIntersection {
            objects: truth.len(),
            verbs: dataset_verbs.len(),
            nouns: nouns.len(),
            vocab_verbs: verbs.len(),
        });
    }

    let n = verb_ids.len();
    let mut report = AaucReport {
        objects: Vec::new(),
        values: Vec::new(),
        ks: Vec::new(),
        n,
        mean: 0.0,
        skipped: 0,
    };
    for (i, name, set) in objects {
        let Some(full) = scorer.scores(i) else {
            report.skipped += 1;
            continue;
        };
        let restricted: Vec<f64> = verb_ids.iter().map(|&g| full[g]).collect();
        let ranking = VerbRanking::from_scores(i, restricted);
        report.values.push(aauc(&ranking, &set)?);
        report.ks.push(set.len());
        report.objects.push(name.clone());
    }
    if report.values.is_empty() {
        return Err(Error::InvalidArgument(
            "scorer could not score any object".into(),
        ));
    }
    report.mean = report.values.iter().sum::<f64>() / report.values.len() as f64;
    Ok(report)
}

/// Equal-width histogram over `[0, 1]`; returns `(lower, upper, count)`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let mut counts = vec![0; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (b as f64 / bins as f64, (b + 1) as f64 / bins as f64, c))
        .collect()
}

/// Top verbs of each row of a score matrix (`rows x n`).
pub fn top_per_row(scores: ArrayView2<f64>, top_n: usize) -> Vec<Vec<usize>> {
    scores
        .axis_iter(Axis(0))
        .map(|row| {
            let r = VerbRanking::from_scores(0, row.to_vec());
            r.order.into_iter().take(top_n).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fp(o: Array2<f64>, v: Array2<f64>) -> FactorPair {
        let d = o.ncols();
        FactorPair {
            o,
            v,
            beta: 0.0,
            d,
            seed: 0,
            iterations_run: 0,
            objective_trace: vec![],
        }
    }

    #[test]
    fn identity_factors() {
        let f = fp(Array2::eye(2), Array2::eye(2));
        let s = similarity_matrix(&f).unwrap();
        assert!((s.s.clone() - Array2::<f64>::eye(2))
            .iter()
            .all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn single_dimension_is_collinear() {
        let f = fp(array![[1.0], [2.0], [0.5]], array![[1.0], [0.0], [3.0]]);
        let s = similarity_matrix(&f).unwrap();
        assert!((s.s[[0, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(s.s[[0, 1]], 0.0);
        assert!((s.s[[0, 2]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_dimension_recorded() {
        let f = fp(
            array![[1.0, 0.0], [2.0, 0.0]],
            array![[1.0, 1.0], [0.5, 2.0]],
        );
        let s = similarity_matrix(&f).unwrap();
        assert_eq!(s.zero_dims, vec![1]);
        assert!(s.s.row(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_embedding_gives_identity_order() {
        let f = fp(
            array![[0.0, 0.0], [1.0, 2.0]],
            array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        );
        let s = similarity_matrix(&f).unwrap();
        let r = object_verb_ranking(&f, &s, 0).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
        assert!(r.scores.iter().all(|&x| x == 0.0));
        assert!(object_verb_ranking(&f, &s, 2).is_err());
    }

    #[test]
    fn one_hot_embedding_follows_similarity_row() {
        let f = fp(
            array![[1.0, 0.0], [0.3, 0.9], [0.0, 0.4]],
            array![[0.2, 1.0], [1.0, 0.1], [0.5, 0.5], [0.0, 2.0]],
        );
        let mut g = f.clone();
        g.o = array![[0.0, 1.0], [0.3, 0.9], [0.0, 0.4]];
        let s = similarity_matrix(&g).unwrap();
        let r = object_verb_ranking(&g, &s, 0).unwrap();
        let expected = VerbRanking::from_scores(0, s.s.row(1).to_vec());
        assert_eq!(r.order, expected.order);
    }

    #[test]
    fn aauc_hand_value() {
        let r = VerbRanking::from_scores(0, vec![4.0, 3.0, 2.0, 1.0]);
        let v = aauc(&r, &BTreeSet::from([0, 1])).unwrap();
        assert!((v - 0.625).abs() < 1e-15);
        let last = aauc(&r, &BTreeSet::from([3])).unwrap();
        assert_eq!(last, 0.0);
        assert!(matches!(aauc(&r, &BTreeSet::new()), Err(Error::EmptyTruth)));
        assert!(aauc(&r, &BTreeSet::from([4])).is_err());
    }

    #[test]
    fn cosine_baseline() {
        let noun = array![1.0, 0.0];
        let a = std::f64::consts::FRAC_PI_3;
        let verbs = array![[2.0, 0.0], [a.cos(), a.sin()], [0.0, 1.0], [0.0, 0.0]];
        let r = baseline_cosine_ranking(noun.view(), verbs.view()).unwrap();
        assert!((r.scores[0] - 1.0).abs() < 1e-12);
        assert!((r.scores[1] - 0.5).abs() < 1e-12);
        assert!(r.scores[2].abs() < 1e-12);
        assert_eq!(r.scores[3], f64::NEG_INFINITY);
        assert_eq!(r.order, vec![0, 1, 2, 3]);

        let orth = array![[0.0, 1.0], [0.0, 3.0]];
        let r = baseline_cosine_ranking(noun.view(), orth.view()).unwrap();
        assert_eq!(r.order, vec![0, 1]);
        assert!(baseline_cosine_ranking(array![0.0, 0.0].view(), verbs.view()).is_err());
        assert!(baseline_cosine_ranking(array![1.0].view(), verbs.view()).is_err());
    }

    #[test]
    fn ppmi_row_baseline() {
        let r = VocabIndex::from_entries(["a", "b"]).0;
        let c = VocabIndex::from_entries(["x", "y", "z"]).0;
        let m = SparseMatrix::from_triplets(r, c, [(0, 1, 0.5), (0, 2, 0.9)]).unwrap();
        let p = PpmiMatrix {
            matrix: m,
            diagnostics: Default::default(),
        };
        assert_eq!(ppmi_row_ranking(&p, 0).unwrap().order, vec![2, 1, 0]);
        assert_eq!(ppmi_row_ranking(&p, 1).unwrap().order, vec![0, 1, 2]);
        assert!(ppmi_row_ranking(&p, 2).is_err());
    }

    #[test]
    fn truth_cutoff() {
        let rows = vec![
            TruthRow {
                object: "cup".into(),
                verb: "fill".into(),
                score: Some(5.0),
            },
            TruthRow {
                object: "cup".into(),
                verb: "eat".into(),
                score: Some(4.0),
            },
            TruthRow {
                object: "pen".into(),
                verb: "write".into(),
                score: None,
            },
        ];
        let sets = truth_sets(&rows, Some(5.0));
        assert_eq!(sets["cup"], BTreeSet::from(["fill".to_string()]));
        assert_eq!(sets["pen"].len(), 1);
        assert_eq!(truth_sets(&rows, None)["cup"].len(), 2);
    }

    #[test]
    fn evaluation_restricts_and_errors() {
        let nouns = VocabIndex::from_entries(["cup", "pen"]).0;
        let verbs = VocabIndex::from_entries(["fill", "write", "eat", "throw"]).0;
        let scorer = FrequencyScorer {
            totals: vec![4.0, 3.0, 2.0, 1.0],
        };
        let mut truth = BTreeMap::new();
        truth.insert(
            "cup".to_string(),
            BTreeSet::from(["fill".to_string(), "sip".to_string()]),
        );
        truth.insert("pen".to_string(), BTreeSet::from(["write".to_string()]));
        truth.insert("dog".to_string(), BTreeSet::from(["walk".to_string()]));
        let rep = evaluate_dataset(&scorer, &nouns, &verbs, &truth).unwrap();
        // restricted verbs: fill, write
        assert_eq!(rep.n, 2);
        assert_eq!(rep.objects, vec!["cup".to_string(), "pen".to_string()]);
        assert_eq!(rep.values, vec![0.5, 0.0]);
        assert_eq!(rep.mean, 0.25);

        let mut single = BTreeMap::new();
        single.insert("cup".to_string(), BTreeSet::from(["eat".to_string()]));
        let rep = evaluate_dataset(&scorer, &nouns, &verbs, &single).unwrap();
        assert_eq!(rep.values.len(), 1);
        assert_eq!(rep.mean, rep.values[0]);

        let mut none = BTreeMap::new();
        none.insert("dog".to_string(), BTreeSet::from(["walk".to_string()]));
        let err = evaluate_dataset(&scorer, &nouns, &verbs, &none).unwrap_err();
        assert!(err.to_string().contains("empty intersection"));
        assert!(err.to_string().contains("2 nouns and 4 verbs"));
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.49, 0.5, 1.0], 2);
        assert_eq!(h, vec![(0.0, 0.5, 2), (0.5, 1.0, 2)]);
    }
}
