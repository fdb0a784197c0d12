use serde::{Deserialize, Serialize};

use super::array::{ParamId, ParamSet, ParamTensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Learning rates tried by a validation sweep.
pub const LEARNING_RATE_GRID: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    /// A zero learning rate is accepted so that training can be made a no-op.
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// One bias-corrected Adam update. The gradient is zeroed afterwards.
pub fn adam_step<S: Scalar>(param: &mut ParamTensor<S>, cfg: &AdamConfig) -> Result<()> {
    if !param.grad.all_finite() {
        return Err(Error::Numeric("non-finite gradient reached the optimizer".into()));
    }
    param.step_count += 1;
    let t = param.step_count as i32;
    let (b1, b2) = (S::lit(cfg.beta1), S::lit(cfg.beta2));
    let lr = S::lit(cfg.learning_rate);
    let eps = S::lit(cfg.epsilon);
    let c1 = S::one() - b1.powi(t);
    let c2 = S::one() - b2.powi(t);
    let value = param.value.as_mut_slice();
    let m = param.adam_m.as_mut_slice();
    let v = param.adam_v.as_mut_slice();
    for (((x, g), m), v) in value
        .iter_mut()
        .zip(param.grad.as_mut_slice())
        .zip(m)
        .zip(v)
    {
        *m = b1 * *m + (S::one() - b1) * *g;
        *v = b2 * *v + (S::one() - b2) * *g * *g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *x -= lr * m_hat / (v_hat.sqrt() + eps);
        *g = S::zero();
    }
    if !param.value.all_finite() {
        return Err(Error::Numeric("parameter became non-finite after an Adam step".into()));
    }
    Ok(())
}

/// Euclidean norm of the gradients of `ids`.
pub fn grad_norm<S: Scalar>(params: &ParamSet<S>, ids: &[ParamId]) -> S {
    ids.iter()
        .flat_map(|&id| params.tensor(id).grad.as_slice())
        .fold(S::zero(), |acc, &g| acc + g * g)
        .sqrt()
}

/// Rescales the gradients of `ids` so their global norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm<S: Scalar>(params: &mut ParamSet<S>, ids: &[ParamId], max_norm: S) -> S {
    let n = grad_norm(params, ids);
    if n > max_norm && n > S::zero() {
        let scale = max_norm / n;
        for &id in ids {
            params
                .tensor_mut(id)
                .grad
                .as_mut_slice()
                .iter_mut()
                .for_each(|g| *g *= scale);
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::array::DenseArray;

    fn tensor(v: &[f64]) -> ParamTensor<f64> {
        ParamTensor::new(DenseArray::from_vec(&[v.len()], v.to_vec()).unwrap())
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = tensor(&[0.3, -1.0]);
        for _ in 0..25 {
            adam_step(&mut p, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p.value.as_slice(), &[0.3, -1.0]);
        assert_eq!(p.step_count, 25);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::with_learning_rate(0.01);
        let mut p = tensor(&[1.0, 1.0, 1.0]);
        p.grad.as_mut_slice().copy_from_slice(&[2.0, -0.5, 1e-3]);
        adam_step(&mut p, &cfg).unwrap();
        // m̂ = g and v̂ = g², so the step is lr · g / (|g| + ε)
        for (x, g) in p.value.as_slice().iter().zip([2.0f64, -0.5, 1e-3]) {
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            assert!((x - expected).abs() < 1e-12);
            assert!((x - (1.0 - 0.01 * g.signum())).abs() < 1e-7);
        }
        assert!(p.grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut p = tensor(&[0.1, 0.2]);
            for i in 0..10 {
                p.grad.as_mut_slice().copy_from_slice(&[0.1 * i as f64, -0.3]);
                adam_step(&mut p, &AdamConfig::default()).unwrap();
            }
            p.value
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = tensor(&[0.0]);
        p.grad.as_mut_slice()[0] = f64::NAN;
        assert!(matches!(adam_step(&mut p, &AdamConfig::default()), Err(Error::Numeric(_))));
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut ps = ParamSet::<f64>::new();
        let a = ps.add("a", DenseArray::zeros(&[2])).unwrap();
        ps.tensor_mut(a).grad.as_mut_slice().copy_from_slice(&[3.0, 4.0]);
        assert_eq!(clip_grad_norm(&mut ps, &[a], 1.0), 5.0);
        assert!((grad_norm(&ps, &[a]) - 1.0).abs() < 1e-12);
        assert_eq!(clip_grad_norm(&mut ps, &[a], 10.0), grad_norm(&ps, &[a]));
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig::with_learning_rate(-1.0).validate().is_err());
    }
}
