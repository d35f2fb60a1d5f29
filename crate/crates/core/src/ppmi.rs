//! Positive pointwise mutual information of noun/verb application counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// PPMI matrix plus the rows and columns that had no observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PpmiMatrix {
    pub matrix: SparseMatrix,
    pub diagnostics: PpmiDiagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PpmiDiagnostics {
    /// Nouns never observed with any verb.
    pub empty_rows: Vec<String>,
    /// Verbs never observed with any noun.
    pub empty_cols: Vec<String>,
}

/// `P(i,k) = max(ln(p(i,k) / (p(i,*) p(*,k))), 0)` with natural log.
/// Cells with zero count are zero and never pass through the log.
pub fn ppmi(counts: &SparseMatrix) -> Result<PpmiMatrix> {
    let total = counts.total();
    if total <= 0.0 {
        return Err(Error::NoObservations);
    }
    let row_p: Vec<f64> = counts.row_sums().into_iter().map(|s| s / total).collect();
    let col_p: Vec<f64> = counts.col_sums().into_iter().map(|s| s / total).collect();

    let triplets = counts.triplets().filter_map(|(i, k, m)| {
        let pmi = ((m / total) / (row_p[i] * col_p[k])).ln();
        (pmi > 0.0).then_some((i, k, pmi))
    });
    let matrix = SparseMatrix::from_triplets(
        counts.row_labels().clone(),
        counts.col_labels().clone(),
        triplets.collect::<Vec<_>>(),
    )?;

    let diagnostics = PpmiDiagnostics {
        empty_rows: zero_labels(&row_p, counts.row_labels().entries()),
        empty_cols: zero_labels(&col_p, counts.col_labels().entries()),
    };
    Ok(PpmiMatrix {
        matrix,
        diagnostics,
    })
}

fn zero_labels(marginals: &[f64], labels: &[String]) -> Vec<String> {
    marginals
        .iter()
        .zip(labels)
        .filter(|(p, _)| **p == 0.0)
        .map(|(_, l)| l.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::VocabIndex;

    fn matrix(rows: &[&[f64]]) -> SparseMatrix {
        let m = rows.len();
        let n = rows[0].len();
        let r = VocabIndex::from_entries((0..m).map(|i| format!("n{i}"))).0;
        let c = VocabIndex::from_entries((0..n).map(|j| format!("v{j}"))).0;
        let trip = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, v)| (i, j, *v)));
        SparseMatrix::from_triplets(r, c, trip.collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn diagonal() {
        let p = ppmi(&matrix(&[&[2.0, 0.0], &[0.0, 2.0]])).unwrap().matrix;
        assert!((p.get(0, 0) - 2f64.ln()).abs() < 1e-12);
        assert!((p.get(1, 1) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(p.get(0, 1), 0.0);
    }

    #[test]
    fn independence_gives_zero() {
        let p = ppmi(&matrix(&[&[1.0; 3], &[1.0; 3], &[1.0; 3]]))
            .unwrap()
            .matrix;
        assert_eq!(p.nnz(), 0);
    }

    #[test]
    fn mixed_signs() {
        let p = ppmi(&matrix(&[&[1.0, 1.0], &[0.0, 2.0]])).unwrap().matrix;
        assert!((p.get(0, 0) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(p.get(0, 1), 0.0);
        assert_eq!(p.get(1, 0), 0.0);
        assert!((p.get(1, 1) - (4.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_an_error() {
        assert!(matches!(
            ppmi(&matrix(&[&[0.0, 0.0]])),
            Err(Error::NoObservations)
        ));
    }

    #[test]
    fn empty_marginals_reported() {
        let out = ppmi(&matrix(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(out.diagnostics.empty_rows, vec!["n1".to_string()]);
        assert_eq!(out.diagnostics.empty_cols, vec!["v1".to_string()]);
    }
}
