//! Vector primitives with analytic backward passes.

use super::array::DenseArray;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Guard added to the norm product in [`cosine`].
pub const COSINE_EPS: f64 = 1e-12;

/// Eight interleaved partial sums break the serial add chain; the lane
/// order is fixed, so results stay deterministic.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut lanes = [S::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: S = ca.remainder().iter().zip(cb.remainder()).fold(S::zero(), |acc, (&x, &y)| acc + x * y);
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail
}

#[inline]
pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

fn check_affine<S: Scalar>(x: &[S], w: &DenseArray<S>, b: &[S]) -> Result<()> {
    if w.shape().len() != 2 || w.shape()[1] != x.len() || w.shape()[0] != b.len() {
        return Err(Error::Dimension(format!(
            "affine: W {:?}, x {}, b {}",
            w.shape(),
            x.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `W x + b`.
pub fn affine<S: Scalar>(x: &[S], w: &DenseArray<S>, b: &[S]) -> Result<Vec<S>> {
    check_affine(x, w, b)?;
    Ok((0..b.len()).map(|r| dot(w.row(r), x) + b[r]).collect())
}

/// `tanh(W x + b)`.
pub fn affine_tanh<S: Scalar>(x: &[S], w: &DenseArray<S>, b: &[S]) -> Result<Vec<S>> {
    let mut h = affine(x, w, b)?;
    h.iter_mut().for_each(|v| *v = v.tanh());
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads<S> {
    pub dx: Vec<S>,
    pub dw: DenseArray<S>,
    pub db: Vec<S>,
}

/// Accumulates the gradients of a linear layer for upstream `dz = dL/d(Wx+b)`.
/// `dx` may be omitted when the input is not trainable.
pub fn affine_backward_into<S: Scalar>(
    x: &[S],
    w: &DenseArray<S>,
    dz: &[S],
    dx: Option<&mut [S]>,
    dw: &mut [S],
    db: &mut [S],
) {
    let cols = x.len();
    for (r, &g) in dz.iter().enumerate() {
        if g == S::zero() {
            continue;
        }
        db[r] += g;
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, &xv) in row.iter_mut().zip(x) {
            *d += g * xv;
        }
    }
    if let Some(dx) = dx {
        for (r, &g) in dz.iter().enumerate() {
            if g == S::zero() {
                continue;
            }
            for (d, &wv) in dx.iter_mut().zip(w.row(r)) {
                *d += g * wv;
            }
        }
    }
}

/// Converts `dL/dh` into `dL/dz` for `h = tanh(z)`.
pub fn tanh_backward<S: Scalar>(h: &[S], dh: &[S]) -> Vec<S> {
    h.iter().zip(dh).map(|(&h, &g)| g * (S::one() - h * h)).collect()
}

/// Backward of [`affine_tanh`] given its output `h` and upstream `dh`.
pub fn affine_tanh_backward<S: Scalar>(x: &[S], w: &DenseArray<S>, h: &[S], dh: &[S]) -> AffineGrads<S> {
    let mut g = AffineGrads {
        dx: vec![S::zero(); x.len()],
        dw: DenseArray::zeros(w.shape()),
        db: vec![S::zero(); h.len()],
    };
    let dz = tanh_backward(h, dh);
    affine_backward_into(x, w, &dz, Some(&mut g.dx), g.dw.as_mut_slice(), &mut g.db);
    g
}

/// `aᵀb / (‖a‖‖b‖ + ε)`; zero vectors give 0.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("cosine: {} vs {}", a.len(), b.len())));
    }
    Ok(dot(a, b) / (norm(a) * norm(b) + S::lit(COSINE_EPS)))
}

/// Accumulates `g · ∂c/∂a` and `g · ∂c/∂b` given the cached dot product and norms.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn cosine_backward_into<S: Scalar>(
    a: &[S],
    b: &[S],
    dot_ab: S,
    norm_a: S,
    norm_b: S,
    g: S,
    da: Option<&mut [S]>,
    db: Option<&mut [S]>,
) {
    let denom = norm_a * norm_b + S::lit(COSINE_EPS);
    let inv = g / denom;
    let scale = g * dot_ab / (denom * denom);
    if let Some(da) = da {
        // d‖a‖/da = a/‖a‖; zero at the origin by convention
        let ka = if norm_a > S::zero() { scale * norm_b / norm_a } else { S::zero() };
        for ((d, &av), &bv) in da.iter_mut().zip(a).zip(b) {
            *d += inv * bv - ka * av;
        }
    }
    if let Some(db) = db {
        let kb = if norm_b > S::zero() { scale * norm_a / norm_b } else { S::zero() };
        for ((d, &bv), &av) in db.iter_mut().zip(b).zip(a) {
            *d += inv * av - kb * bv;
        }
    }
}

pub fn cosine_backward<S: Scalar>(a: &[S], b: &[S], g: S) -> (Vec<S>, Vec<S>) {
    let mut da = vec![S::zero(); a.len()];
    let mut db = vec![S::zero(); b.len()];
    cosine_backward_into(a, b, dot(a, b), norm(a), norm(b), g, Some(&mut da), Some(&mut db));
    (da, db)
}

/// Max-shifted softmax.
pub fn softmax<S: Scalar>(scores: &[S]) -> Result<Vec<S>> {
    if scores.is_empty() {
        return Err(Error::Dimension("softmax of an empty vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let max = scores.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Vector-Jacobian product of softmax: `dL/ds` from `p` and `dL/dp`.
pub fn softmax_backward<S: Scalar>(p: &[S], dp: &[S]) -> Vec<S> {
    let inner = dot(p, dp);
    p.iter().zip(dp).map(|(&pi, &gi)| pi * (gi - inner)).collect()
}

/// `exp(-(x-μ)² / (2σ²))`.
pub fn gaussian_kernel<S: Scalar>(x: S, mu: S, sigma: S) -> Result<S> {
    if !(sigma > S::zero()) {
        return Err(Error::InvalidConfig(format!("kernel sigma must be > 0, got {sigma}")));
    }
    Ok(gaussian_unchecked(x, mu, sigma))
}

#[inline]
pub(crate) fn gaussian_unchecked<S: Scalar>(x: S, mu: S, sigma: S) -> S {
    let d = x - mu;
    (-(d * d) / (S::lit(2.0) * sigma * sigma)).exp()
}
