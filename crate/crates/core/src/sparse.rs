//! Row-compressed non-negative matrices labeled by noun and verb vocabularies.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::io::fmt_sig;
use crate::vocab::VocabIndex;

/// Sparse matrix with nouns on rows and verbs on columns. Stored values are
/// strictly positive; absent entries are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: VocabIndex,
    cols: VocabIndex,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Repeated
    /// coordinates are summed; non-positive sums are dropped.
    pub fn from_triplets<I>(rows: VocabIndex, cols: VocabIndex, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let (m, n) = (rows.len(), cols.len());
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= m {
                return Err(Error::OutOfRange { index: i, len: m });
            }
            if j >= n {
                return Err(Error::OutOfRange { index: j, len: n });
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i}, {j}) = {v} is not a finite non-negative value"
                )));
            }
            *acc.entry((i, j)).or_insert(0.0) += v;
        }
        let mut indptr = vec![0; m + 1];
        let mut indices = Vec::with_capacity(acc.len());
        let mut values = Vec::with_capacity(acc.len());
        for ((i, j), v) in acc {
            if v > 0.0 {
                indptr[i + 1] += 1;
                indices.push(j);
                values.push(v);
            }
        }
        for i in 0..m {
            indptr[i + 1] += indptr[i];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn row_labels(&self) -> &VocabIndex {
        &self.rows
    }

    pub fn col_labels(&self) -> &VocabIndex {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(col, value)` pairs of row `i`, in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows()).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols()];
        for (j, v) in self.indices.iter().zip(&self.values) {
            sums[*j] += v;
        }
        sums
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut dense = Array2::zeros((self.n_rows(), self.n_cols()));
        for (i, j, v) in self.triplets() {
            dense[[i, j]] = v;
        }
        dense
    }

    /// Writes `#rows=<m> cols=<n>`, optional extra comment lines, then one
    /// `noun<TAB>verb<TAB>value` line per stored entry.
    pub fn write_tsv<W: Write>(&self, mut out: W, comments: &[String]) -> std::io::Result<()> {
        writeln!(out, "#rows={} cols={}", self.n_rows(), self.n_cols())?;
        for c in comments {
            writeln!(out, "#{c}")?;
        }
        for (i, j, v) in self.triplets() {
            let value = if v.fract() == 0.0 && v < 1e15 {
                format!("{}", v as u64)
            } else {
                fmt_sig(v, 12)
            };
            writeln!(
                out,
                "{}\t{}\t{}",
                self.rows.entries()[i],
                self.cols.entries()[j],
                value
            )?;
        }
        Ok(())
    }

    /// Reads the triplet TSV format against known vocabularies.
    pub fn read_tsv<R: BufRead>(
        input: R,
        rows: VocabIndex,
        cols: VocabIndex,
        file: &str,
    ) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Format {
            file: file.to_string(),
            line,
            msg,
        };
        let mut triplets = Vec::new();
        let mut saw_header = false;
        for (no, line) in input.lines().enumerate() {
            let line = line?;
            let no = no + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if !saw_header {
                    let (m, n) = parse_shape_header(rest)
                        .ok_or_else(|| err(no, format!("bad header {line:?}")))?;
                    if m != rows.len() || n != cols.len() {
                        return Err(err(
                            no,
                            format!(
                                "header shape {m}x{n} does not match vocabularies {}x{}",
                                rows.len(),
                                cols.len()
                            ),
                        ));
                    }
                    saw_header = true;
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !saw_header {
                return Err(err(no, "missing #rows= header".into()));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(
                    no,
                    format!("expected 3 fields, found {}", fields.len()),
                ));
            }
            let i = rows
                .id_of(fields[0])
                .ok_or_else(|| err(no, format!("unknown row label {:?}", fields[0])))?;
            let j = cols
                .id_of(fields[1])
                .ok_or_else(|| err(no, format!("unknown column label {:?}", fields[1])))?;
            let v: f64 = fields[2]
                .parse()
                .map_err(|_| err(no, format!("bad value {:?}", fields[2])))?;
            triplets.push((i, j, v));
        }
        if !saw_header {
            return Err(err(0, "missing #rows= header".into()));
        }
        SparseMatrix::from_triplets(rows, cols, triplets)
    }
}

fn parse_shape_header(rest: &str) -> Option<(usize, usize)> {
    let mut parts = rest.split_whitespace();
    let m = parts.next()?.strip_prefix("rows=")?.parse().ok()?;
    let n = parts.next()?.strip_prefix("cols=")?.parse().ok()?;
    Some((m, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocabs() -> (VocabIndex, VocabIndex) {
        (
            VocabIndex::from_entries(["potato", "ice cream", "knife"]).0,
            VocabIndex::from_entries(["boil", "eat"]).0,
        )
    }

    #[test]
    fn duplicates_accumulate() {
        let (r, c) = vocabs();
        let m = SparseMatrix::from_triplets(r, c, [(0, 0, 1.0), (0, 0, 2.0), (2, 1, 1.0)]).unwrap();
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row_sums(), vec![3.0, 0.0, 1.0]);
        assert_eq!(m.col_sums(), vec![3.0, 1.0]);
    }

    #[test]
    fn rejects_bad_entries() {
        let (r, c) = vocabs();
        assert!(SparseMatrix::from_triplets(r.clone(), c.clone(), [(3, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(r, c, [(0, 0, -1.0)]).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let (r, c) = vocabs();
        let m = SparseMatrix::from_triplets(
            r.clone(),
            c.clone(),
            [(1, 0, 4.0), (2, 1, 0.123456789012345)],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_tsv(&mut buf, &["config_hash=abc".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#rows=3 cols=2\n#config_hash=abc\nice_cream\tboil\t4\n"));
        let back = SparseMatrix::read_tsv(&buf[..], r, c, "m.tsv").unwrap();
        assert_eq!(back.get(1, 0), 4.0);
        assert!((back.get(2, 1) - 0.123456789012345).abs() < 1e-11);
    }

    #[test]
    fn tsv_shape_mismatch() {
        let (r, c) = vocabs();
        let text = "#rows=2 cols=2\n";
        assert!(SparseMatrix::read_tsv(text.as_bytes(), r, c, "x").is_err());
    }
}
