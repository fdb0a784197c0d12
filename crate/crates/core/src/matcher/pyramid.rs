use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::MatchingMatrix;
use crate::error::{Error, Result};
use crate::numeric::conv::{conv2d_valid_backward_into, dynamic_max_pool_backward_into};
use crate::numeric::ops::{affine, affine_tanh, tanh_backward};
use crate::numeric::{conv2d_valid, dynamic_max_pool, init, DenseArray, GradView, ParamId, ParamSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PyramidConfig {
    pub maps: usize,
    /// Window height along the query axis.
    pub window_rows: usize,
    /// Window width along the sentence axis.
    pub window_cols: usize,
    pub pool_rows: usize,
    pub pool_cols: usize,
    pub hidden: usize,
    /// Matrices are zero-padded (or truncated) to `rows × cols`.
    pub rows: usize,
    pub cols: usize,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            maps: 128,
            window_rows: 2,
            window_cols: 4,
            pool_rows: 4,
            pool_cols: 8,
            hidden: 128,
            rows: 16,
            cols: 64,
        }
    }
}

impl PyramidConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("maps", self.maps),
            ("window_rows", self.window_rows),
            ("window_cols", self.window_cols),
            ("pool_rows", self.pool_rows),
            ("pool_cols", self.pool_cols),
            ("hidden", self.hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("matchpyramid {name} must be >= 1")));
        }
        let (oh, ow) = self.conv_shape();
        if self.pool_rows > oh || self.pool_cols > ow {
            return Err(Error::InvalidConfig(format!(
                "pooling grid {}x{} exceeds convolution output {oh}x{ow}",
                self.pool_rows, self.pool_cols
            )));
        }
        Ok(())
    }

    pub fn padded_shape(&self) -> (usize, usize) {
        (self.rows.max(self.window_rows), self.cols.max(self.window_cols))
    }

    pub fn conv_shape(&self) -> (usize, usize) {
        let (h, w) = self.padded_shape();
        (h - self.window_rows + 1, w - self.window_cols + 1)
    }

    pub fn flat_len(&self) -> usize {
        self.maps * self.pool_rows * self.pool_cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidParams {
    pub kernels: ParamId,
    pub conv_bias: ParamId,
    pub w_hidden: ParamId,
    pub b_hidden: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
    pub config: PyramidConfig,
}

struct Trace<S> {
    input: DenseArray<S>,
    conv: DenseArray<S>,
    argmax: Vec<usize>,
    flat: Vec<S>,
    hidden: Vec<S>,
    score: S,
}

impl PyramidParams {
    pub fn register<S: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<S>,
        config: PyramidConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let scale = init::INIT_SCALE;
        Ok(Self {
            kernels: params.add(
                "mp.kernels",
                init::uniform(&[c.maps, 1, c.window_rows, c.window_cols], scale, rng),
            )?,
            conv_bias: params.add("mp.conv_bias", DenseArray::zeros(&[c.maps]))?,
            w_hidden: params.add("mp.w_hidden", init::uniform(&[c.hidden, c.flat_len()], scale, rng))?,
            b_hidden: params.add("mp.b_hidden", DenseArray::zeros(&[c.hidden]))?,
            w_out: params.add("mp.w_out", init::uniform(&[1, c.hidden], scale, rng))?,
            b_out: params.add("mp.b_out", DenseArray::zeros(&[1]))?,
            config,
        })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        vec![self.kernels, self.conv_bias, self.w_hidden, self.b_hidden, self.w_out, self.b_out]
    }

    fn forward<'p, S: Scalar>(&self, value: impl Fn(ParamId) -> &'p DenseArray<S>, m: &MatchingMatrix<S>) -> Result<Trace<S>> {
        let (h, w) = self.config.padded_shape();
        let input = m.padded(h, w);
        let conv = conv2d_valid(&input, value(self.kernels), value(self.conv_bias).as_slice())?;
        let pooled = dynamic_max_pool(&conv, self.config.pool_rows, self.config.pool_cols)?;
        let flat = pooled.values.into_vec();
        let hidden = affine_tanh(&flat, value(self.w_hidden), value(self.b_hidden).as_slice())?;
        let score = affine(&hidden, value(self.w_out), value(self.b_out).as_slice())?[0];
        Ok(Trace { input, conv, argmax: pooled.argmax, flat, hidden, score })
    }

    pub fn score<S: Scalar>(&self, params: &ParamSet<S>, m: &MatchingMatrix<S>) -> Result<S> {
        Ok(self.forward(|id| params.value(id), m)?.score)
    }

    /// Accumulates `g · ∂ψ/∂θ` and returns `g · ∂ψ/∂M` over the unpadded
    /// `m.rows × m.cols` entries.
    pub fn backward<S: Scalar>(&self, view: &mut GradView<'_, S>, m: &MatchingMatrix<S>, g: S) -> Result<Vec<S>> {
        let kernels = view.value(self.kernels);
        let w_hidden = view.value(self.w_hidden);
        let w_out = view.value(self.w_out);
        let t = self.forward(|id| view.value(id), m)?;
        let hidden = self.config.hidden;
        let w_out = w_out.as_slice();
        let dh: Vec<S> = w_out.iter().map(|&wv| g * wv).collect();
        for (d, &hv) in view.grad(self.w_out).iter_mut().zip(&t.hidden) {
            *d += g * hv;
        }
        view.grad(self.b_out)[0] += g;
        let dz = tanh_backward(&t.hidden, &dh);
        let flat_len = t.flat.len();
        let mut d_flat = vec![S::zero(); flat_len];
        {
            let gw = view.grad(self.w_hidden);
            for r in 0..hidden {
                let z = dz[r];
                if z == S::zero() {
                    continue;
                }
                let w_row = w_hidden.row(r);
                for ((gv, &xv), (df, &wv)) in gw[r * flat_len..(r + 1) * flat_len]
                    .iter_mut()
                    .zip(&t.flat)
                    .zip(d_flat.iter_mut().zip(w_row))
                {
                    *gv += z * xv;
                    *df += z * wv;
                }
            }
        }
        for (d, &z) in view.grad(self.b_hidden).iter_mut().zip(&dz) {
            *d += z;
        }
        let mut d_conv = vec![S::zero(); t.conv.len()];
        dynamic_max_pool_backward_into(&t.argmax, &d_flat, &mut d_conv);
        let mut d_input = vec![S::zero(); t.input.len()];
        let mut d_kernels = vec![S::zero(); kernels.len()];
        let mut d_bias = vec![S::zero(); self.config.maps];
        conv2d_valid_backward_into(
            &t.input,
            kernels,
            &t.conv,
            &d_conv,
            Some(&mut d_input),
            &mut d_kernels,
            &mut d_bias,
        );
        for (d, v) in view.grad(self.kernels).iter_mut().zip(d_kernels) {
            *d += v;
        }
        for (d, v) in view.grad(self.conv_bias).iter_mut().zip(d_bias) {
            *d += v;
        }
        let w = t.input.shape()[1];
        let mut d_m = vec![S::zero(); m.rows * m.cols];
        for r in 0..m.rows.min(t.input.shape()[0]) {
            for c in 0..m.cols.min(w) {
                d_m[r * m.cols + c] = d_input[r * w + c];
            }
        }
        Ok(d_m)
    }
}
