//! Paired t-test and Pearson correlation with two-sided p-values.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Paired two-sided t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} paired samples",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "paired t-test needs at least 2 pairs".into(),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::DegenerateTTest);
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: two_sided_p(t, (n - 1) as f64),
        df: n - 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    /// Set when either input has zero variance; `r` is then 0 and `p` 1.
    pub degenerate: bool,
}

/// Pearson correlation with a p-value from the t-transform on `n - 2`
/// degrees of freedom.
pub fn pearson<'a, I, J>(x: I, y: J) -> Correlation
where
    I: IntoIterator<Item = &'a f64>,
    J: IntoIterator<Item = &'a f64>,
{
    let pairs: Vec<(f64, f64)> = x.into_iter().copied().zip(y.into_iter().copied()).collect();
    let n = pairs.len();
    let degenerate = Correlation {
        r: 0.0,
        p: 1.0,
        degenerate: true,
    };
    if n < 2 {
        return degenerate;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return degenerate;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let p = if n > 2 {
        let df = (n - 2) as f64;
        let t = if r.abs() >= 1.0 {
            f64::INFINITY
        } else {
            r * (df / (1.0 - r * r)).sqrt()
        };
        two_sided_p(t, df)
    } else {
        1.0
    };
    Correlation {
        r,
        p,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_ttest() {
        let a = [2.0, 2.0, 2.0, 0.0];
        let b = [1.0, 1.0, 1.0, 1.0];
        let t = paired_ttest(&a, &b).unwrap();
        assert!((t.t - 1.0).abs() < 1e-12);
        assert_eq!(t.df, 3);
        // two-sided tail of Student-t(3) at 1.0
        assert!((t.p - 0.390_98).abs() < 1e-4, "{}", t.p);
    }

    #[test]
    fn degenerate_and_antisymmetric() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(paired_ttest(&a, &a), Err(Error::DegenerateTTest)));
        let b = [0.5, 2.5, 1.0];
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert!((ab.p - ba.p).abs() < 1e-15);
        assert!(paired_ttest(&a, &b[..2]).is_err());
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let c = pearson(&x, &y);
        assert!((c.r - 1.0).abs() < 1e-12);
        assert!(c.p < 1e-12);
        let shifted: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        assert!((pearson(&x, &shifted).r - c.r).abs() < 1e-12);
        assert!(pearson(&x, &[1.0; 4]).degenerate);
    }

    #[test]
    fn pearson_p_value() {
        // r = 0.5 with n = 12: t = 0.5 * sqrt(10 / 0.75) = 1.8257, df = 10
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let c = pearson(&x, &x);
        assert!(c.r > 0.999);
        let t = 0.5 * (10.0f64 / 0.75).sqrt();
        let p = two_sided_p(t, 10.0);
        assert!((p - 0.0979).abs() < 1e-3, "{p}");
    }
}
