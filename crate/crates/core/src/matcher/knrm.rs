use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::MatchingMatrix;
use crate::error::{Error, Result};
use crate::numeric::ops::gaussian_unchecked;
use crate::numeric::{init, DenseArray, GradView, ParamId, ParamSet};
use crate::scalar::Scalar;

/// Guard inside the log of each soft-TF count.
pub const LOG_EPS: f64 = 1e-10;

/// Gaussian kernel centers and widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub mus: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl Default for KernelBank {
    /// One exact-match kernel and ten soft kernels spaced 0.2 apart.
    fn default() -> Self {
        let mut mus = vec![1.0];
        let mut sigmas = vec![1e-3];
        for i in 0..10 {
            mus.push(0.9 - 0.2 * i as f64);
            sigmas.push(0.1);
        }
        Self { mus, sigmas }
    }
}

impl KernelBank {
    pub fn new(mus: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let bank = Self { mus, sigmas };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mus.is_empty() || self.mus.len() != self.sigmas.len() {
            return Err(Error::InvalidConfig(format!(
                "kernel bank needs matching non-empty mus/sigmas, got {} and {}",
                self.mus.len(),
                self.sigmas.len()
            )));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("kernel sigma must be > 0, got {s}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }
}

/// Per-kernel features `φ_k` plus the soft-TF counts behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFeatures<S> {
    pub phi: Vec<S>,
    /// `rows × kernels`, zero on masked rows.
    pub soft_tf: Vec<S>,
}

pub fn kernel_features<S: Scalar>(m: &MatchingMatrix<S>, bank: &KernelBank) -> KernelFeatures<S> {
    let nk = bank.len();
    let mus: Vec<S> = bank.mus.iter().map(|&v| S::lit(v)).collect();
    let sigmas: Vec<S> = bank.sigmas.iter().map(|&v| S::lit(v)).collect();
    let eps = S::lit(LOG_EPS);
    let mut phi = vec![S::zero(); nk];
    let mut soft_tf = vec![S::zero(); m.rows * nk];
    for i in 0..m.rows {
        if !m.row_mask[i] {
            continue;
        }
        let tf = &mut soft_tf[i * nk..(i + 1) * nk];
        for j in 0..m.cols {
            if !m.col_mask[j] {
                continue;
            }
            let x = m.get(i, j);
            for k in 0..nk {
                tf[k] += gaussian_unchecked(x, mus[k], sigmas[k]);
            }
        }
        for k in 0..nk {
            phi[k] += (tf[k] + eps).ln();
        }
    }
    KernelFeatures { phi, soft_tf }
}

/// Gradient of the matrix entries given `d_phi`.
pub fn kernel_features_backward<S: Scalar>(
    m: &MatchingMatrix<S>,
    bank: &KernelBank,
    feats: &KernelFeatures<S>,
    d_phi: &[S],
) -> Vec<S> {
    let nk = bank.len();
    let eps = S::lit(LOG_EPS);
    let mus: Vec<S> = bank.mus.iter().map(|&v| S::lit(v)).collect();
    let sigmas: Vec<S> = bank.sigmas.iter().map(|&v| S::lit(v)).collect();
    let mut d = vec![S::zero(); m.rows * m.cols];
    let mut coef = vec![S::zero(); nk];
    for i in 0..m.rows {
        if !m.row_mask[i] {
            continue;
        }
        for k in 0..nk {
            coef[k] = d_phi[k] / (feats.soft_tf[i * nk + k] + eps);
        }
        for j in 0..m.cols {
            if !m.col_mask[j] {
                continue;
            }
            let x = m.get(i, j);
            let mut g = S::zero();
            for k in 0..nk {
                let diff = x - mus[k];
                let kv = gaussian_unchecked(x, mus[k], sigmas[k]);
                g += coef[k] * kv * (-diff / (sigmas[k] * sigmas[k]));
            }
            d[i * m.cols + j] = g;
        }
    }
    d
}

/// Linear scoring head over the kernel features.
#[derive(Debug, Clone, PartialEq)]
pub struct KnrmParams {
    pub weights: ParamId,
    pub bias: ParamId,
    pub bank: KernelBank,
}

impl KnrmParams {
    pub fn register<S: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<S>,
        bank: KernelBank,
        rng: &mut R,
    ) -> Result<Self> {
        bank.validate()?;
        Ok(Self {
            weights: params.add("knrm.weights", init::uniform(&[bank.len()], init::INIT_SCALE, rng))?,
            bias: params.add("knrm.bias", DenseArray::zeros(&[1]))?,
            bank,
        })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        vec![self.weights, self.bias]
    }

    pub fn score<S: Scalar>(&self, params: &ParamSet<S>, m: &MatchingMatrix<S>) -> S {
        let feats = kernel_features(m, &self.bank);
        head(params.value(self.weights).as_slice(), params.value(self.bias).as_slice()[0], &feats.phi)
    }

    /// Accumulates `g · ∂ψ/∂θ` for the head and returns `g · ∂ψ/∂M`.
    pub fn backward<S: Scalar>(&self, view: &mut GradView<'_, S>, m: &MatchingMatrix<S>, g: S) -> Vec<S> {
        let feats = kernel_features(m, &self.bank);
        let w = view.value(self.weights).as_slice();
        for (d, &p) in view.grad(self.weights).iter_mut().zip(&feats.phi) {
            *d += g * p;
        }
        view.grad(self.bias)[0] += g;
        let d_phi: Vec<S> = w.iter().map(|&wk| g * wk).collect();
        kernel_features_backward(m, &self.bank, &feats, &d_phi)
    }
}

fn head<S: Scalar>(w: &[S], b: S, phi: &[S]) -> S {
    w.iter().zip(phi).fold(b, |acc, (&wk, &p)| acc + wk * p)
}
