//! NNDSVD initialization.
//!
//! The leading singular pair of a non-negative matrix can be taken
//! non-negative. Every later pair `(u, v)` is split into positive and
//! negative sections; the section pair with the larger norm product
//! becomes the factor column, scaled by `sqrt(sigma * norm product)`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng;

/// Singular values and vectors, sorted by decreasing singular value.
pub(crate) struct Svd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub v: Array2<f64>,
}

pub(crate) fn svd(p: ArrayView2<f64>) -> Svd {
    let (m, n) = p.dim();
    let dm = DMatrix::from_fn(m, n, |i, j| p[[i, j]]);
    let dec = dm.svd(true, true);
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let k = order.len();
    Svd {
        u: Array2::from_shape_fn((m, k), |(i, c)| u[(i, order[c])]),
        s: order.iter().map(|&c| dec.singular_values[c]).collect(),
        v: Array2::from_shape_fn((n, k), |(j, c)| v_t[(order[c], j)]),
    }
}

/// Singular values of `p` in decreasing order.
pub fn singular_values(p: ArrayView2<f64>) -> Vec<f64> {
    svd(p).s
}

fn split(x: ndarray::ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    (x.mapv(|a| a.max(0.0)), x.mapv(|a| (-a).max(0.0)))
}

fn norm(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

/// NNDSVD factors `(O0, V0)` of shapes `m x d` and `n x d`.
pub fn nndsvd(p: ArrayView2<f64>, d: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let (m, n) = p.dim();
    if d == 0 || d > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "d = {d} must lie in [1, {}]",
            m.min(n)
        )));
    }
    if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix must be finite and non-negative".into(),
        ));
    }
    if !p.iter().any(|&x| x > 0.0) {
        return Err(Error::NoObservations);
    }
    let Svd { u, s, v } = svd(p);
    let mut o = Array2::zeros((m, d));
    let mut vv = Array2::zeros((n, d));

    let root = s[0].sqrt();
    o.column_mut(0)
        .assign(&u.column(0).mapv(|a| root * a.abs()));
    vv.column_mut(0)
        .assign(&v.column(0).mapv(|a| root * a.abs()));

    for (c, &sc) in s.iter().enumerate().take(d).skip(1) {
        let (up, un) = split(u.column(c));
        let (vp, vn) = split(v.column(c));
        let (nup, nun, nvp, nvn) = (norm(&up), norm(&un), norm(&vp), norm(&vn));
        let (pos, neg) = (nup * nvp, nun * nvn);
        let (x, y, nx, ny, mass) = if pos >= neg {
            (up, vp, nup, nvp, pos)
        } else {
            (un, vn, nun, nvn, neg)
        };
        if mass <= 0.0 || nx == 0.0 || ny == 0.0 {
            continue;
        }
        let scale = (sc * mass).sqrt();
        o.column_mut(c).assign(&(x * (scale / nx)));
        vv.column_mut(c).assign(&(y * (scale / ny)));
    }
    Ok((o, vv))
}

/// Uniform random factors scaled so that `O V^T` has the magnitude of `p`.
pub fn random_init(p: ArrayView2<f64>, d: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let (m, n) = p.dim();
    let mean = p.mean().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let scale = (mean / d as f64).sqrt();
    let mut r = rng(seed);
    let o = Array2::from_shape_simple_fn((m, d), || scale * r.random::<f64>());
    let v = Array2::from_shape_simple_fn((n, d), || scale * r.random::<f64>());
    (o, v)
}
