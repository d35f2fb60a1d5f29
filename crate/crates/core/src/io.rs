//! TSV/JSON readers and writers shared by the pipeline.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::vocab::normalize;

/// Formats `v` with `digits` significant digits, like C's `%.{digits}g`.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes a file by filling a temporary sibling and renaming it into place.
pub fn atomic_write<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        fill(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    atomic_write(path, |out| {
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Dense matrix with one labeled row per entity and labeled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Array2<f64>,
}

impl LabeledMatrix {
    /// Header `id<TAB>c0<TAB>c1...`, optional `#` comment lines before it,
    /// then `label<TAB>v0<TAB>v1...`.
    pub fn write_tsv(&self, out: &mut dyn Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(out, "#{c}")?;
        }
        write!(out, "id")?;
        for c in &self.col_labels {
            write!(out, "\t{c}")?;
        }
        writeln!(out)?;
        for (label, row) in self.row_labels.iter().zip(self.values.rows()) {
            write!(out, "{label}")?;
            for v in row {
                write!(out, "\t{}", fmt_sig(*v, 12))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let reader = open(path)?;
        let mut header: Option<Vec<String>> = None;
        let mut row_labels = Vec::new();
        let mut data = Vec::new();
        for (no, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let no = no + 1;
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let label = fields.next().unwrap_or_default().to_string();
            match &header {
                None => header = Some(fields.map(str::to_string).collect()),
                Some(h) => {
                    let values: Vec<f64> = fields
                        .map(|f| {
                            f.parse::<f64>()
                                .map_err(|_| format_err(path, no, format!("bad number {f:?}")))
                        })
                        .collect::<Result<_>>()?;
                    if values.len() != h.len() {
                        return Err(format_err(
                            path,
                            no,
                            format!("expected {} values, found {}", h.len(), values.len()),
                        ));
                    }
                    row_labels.push(label);
                    data.extend(values);
                }
            }
        }
        let col_labels = header.ok_or_else(|| format_err(path, 0, "missing header row"))?;
        let values = Array2::from_shape_vec((row_labels.len(), col_labels.len()), data)
            .map_err(|e| format_err(path, 0, e.to_string()))?;
        Ok(LabeledMatrix {
            row_labels,
            col_labels,
            values,
        })
    }
}

/// Word vectors in the whitespace-separated text format `token v1 ... vD`.
/// A leading `count dim` line (word2vec text format) is skipped.
#[derive(Debug, Clone)]
pub struct WordVectors {
    pub tokens: std::collections::HashMap<String, usize>,
    pub vectors: Array2<f64>,
}

impl WordVectors {
    pub fn read(path: &Path) -> Result<Self> {
        let reader = open(path)?;
        let mut tokens = std::collections::HashMap::new();
        let mut data = Vec::new();
        let mut dim: Option<usize> = None;
        let mut rows = 0;
        for (no, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if no == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| format_err(path, no + 1, format!("bad number {f:?}")))
                })
                .collect::<Result<_>>()?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(format_err(
                        path,
                        no + 1,
                        format!("expected {d} components, found {}", values.len()),
                    ))
                }
                _ => {}
            }
            let token = normalize(fields[0]);
            if tokens.contains_key(&token) {
                continue;
            }
            tokens.insert(token, rows);
            data.extend(values);
            rows += 1;
        }
        let dim = dim.ok_or_else(|| format_err(path, 0, "no vectors"))?;
        let vectors = Array2::from_shape_vec((rows, dim), data)
            .map_err(|e| format_err(path, 0, e.to_string()))?;
        Ok(WordVectors { tokens, vectors })
    }

    pub fn get(&self, token: &str) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.tokens.get(token).map(|&i| self.vectors.row(i))
    }
}

/// Rows of a ground-truth table `object<TAB>verb<TAB>score?`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub object: String,
    pub verb: String,
    pub score: Option<f64>,
}

pub fn read_truth_table(path: &Path) -> Result<Vec<TruthRow>> {
    let reader = open(path)?;
    let mut rows = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let score = match fields.len() {
            2 => None,
            3 => match fields[2].trim().parse::<f64>() {
                Ok(s) => Some(s),
                // tolerate a header row
                Err(_) if no == 0 => continue,
                Err(_) => {
                    return Err(format_err(
                        path,
                        no + 1,
                        format!("bad score {:?}", fields[2]),
                    ))
                }
            },
            n => {
                return Err(format_err(
                    path,
                    no + 1,
                    format!("expected 2 or 3 fields, found {n}"),
                ))
            }
        };
        rows.push(TruthRow {
            object: normalize(fields[0]),
            verb: normalize(fields[1]),
            score,
        });
    }
    Ok(rows)
}

/// Target table with header `object<TAB>dim_1...dim_D`.
pub fn read_target_table(path: &Path) -> Result<LabeledMatrix> {
    let mut table = LabeledMatrix::read_tsv(path)?;
    table.row_labels = table.row_labels.iter().map(|l| normalize(l)).collect();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(std::f64::consts::LN_2, 12), "0.69314718056");
        assert_eq!(fmt_sig(1.0, 12), "1");
        assert_eq!(fmt_sig(123456.5, 12), "123456.5");
        assert_eq!(fmt_sig(1.5e-9, 12), "1.5e-9");
        assert_eq!(fmt_sig(-2.25, 3), "-2.25");
        assert_eq!(fmt_sig(0.0, 12), "0");
        let v = 0.123456789012345;
        assert!((fmt_sig(v, 12).parse::<f64>().unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn labeled_matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("O.tsv");
        let m = LabeledMatrix {
            row_labels: vec!["a".into(), "b".into()],
            col_labels: vec!["0".into(), "1".into()],
            values: ndarray::array![[1.0, 0.5], [0.0, 2.0]],
        };
        atomic_write(&path, |out| m.write_tsv(out, &["x=1".into()])).unwrap();
        assert_eq!(LabeledMatrix::read_tsv(&path).unwrap(), m);
    }

    #[test]
    fn word_vectors_skip_word2vec_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        fs::write(&path, "2 3\ncut 1 0 0\nApple 0 1 0\n").unwrap();
        let wv = WordVectors::read(&path).unwrap();
        assert_eq!(wv.vectors.dim(), (2, 3));
        assert_eq!(wv.get("apple").unwrap()[1], 1.0);
    }

    #[test]
    fn truth_table_with_and_without_scores() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        fs::write(
            &path,
            "object\tverb\tscore\nCup\tfill\t5.0\ncup\tdrink\t3\n",
        )
        .unwrap();
        let rows = read_truth_table(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].object, "cup");
        assert_eq!(rows[1].score, Some(3.0));
        fs::write(&path, "cup\tfill\n").unwrap();
        assert_eq!(read_truth_table(&path).unwrap()[0].score, None);
    }
}
