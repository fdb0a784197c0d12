//! Central finite-difference verification of analytic gradients.

use rand::seq::index;

use super::array::{ParamId, ParamSet};
use crate::rng::substream;

pub const FD_STEP: f64 = 1e-5;

/// Magnitude below which relative error is measured against this floor
/// instead of the gradient itself.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probes: usize,
    pub worst: Option<ProbeResult>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients against central differences.
///
/// `loss(params, accumulate)` must return the scalar loss and, when
/// `accumulate` is true, add its gradient into the parameters' grad slots.
/// `probes` coordinates are drawn per tensor (all of them when the tensor is
/// smaller). An empty `ids` checks every tensor.
pub fn grad_check<F>(
    params: &mut ParamSet<f64>,
    ids: &[ParamId],
    probes: usize,
    seed: u64,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&mut ParamSet<f64>, bool) -> f64,
{
    let ids: Vec<ParamId> = if ids.is_empty() { params.ids().collect() } else { ids.to_vec() };
    params.zero_grads();
    loss(params, true);
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| params.tensor(id).grad.as_slice().to_vec())
        .collect();
    params.zero_grads();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        probes: 0,
        worst: None,
    };
    for (t, &id) in ids.iter().enumerate() {
        let n = params.value(id).len();
        let coords: Vec<usize> = if probes >= n {
            (0..n).collect()
        } else {
            let mut rng = substream(seed, id.index() as u64);
            index::sample(&mut rng, n, probes).into_vec()
        };
        for c in coords {
            let orig = params.value(id).as_slice()[c];
            params.value_mut(id).as_mut_slice()[c] = orig + FD_STEP;
            let plus = loss(params, false);
            params.value_mut(id).as_mut_slice()[c] = orig - FD_STEP;
            let minus = loss(params, false);
            params.value_mut(id).as_mut_slice()[c] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[t][c];
            let rel = relative_error(a, numeric);
            report.probes += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some(ProbeResult {
                    param: params.name(id).to_owned(),
                    index: c,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::array::DenseArray;

    #[test]
    fn constant_closure() {
        let mut ps = ParamSet::new();
        ps.add("x", DenseArray::filled(&[3], 1.0)).unwrap();
        let r = grad_check(&mut ps, &[], 10, 0, |_, _| 4.2);
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.probes, 3);
    }

    #[test]
    fn square_at_three() {
        let mut ps = ParamSet::new();
        let x = ps.add("x", DenseArray::filled(&[1], 3.0)).unwrap();
        let r = grad_check(&mut ps, &[], 1, 0, |p, acc| {
            let v = p.value(x).as_slice()[0];
            if acc {
                p.tensor_mut(x).grad.as_mut_slice()[0] += 2.0 * v;
            }
            v * v
        });
        let w = r.worst.unwrap();
        assert_eq!(w.analytic, 6.0);
        assert!((w.numeric - 6.0).abs() < 1e-8);
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut ps = ParamSet::new();
        let x = ps.add("x", DenseArray::filled(&[1], 2.0)).unwrap();
        let r = grad_check(&mut ps, &[], 1, 0, |p, acc| {
            let v = p.value(x).as_slice()[0];
            if acc {
                p.tensor_mut(x).grad.as_mut_slice()[0] += v;
            }
            v * v
        });
        assert!(r.max_rel_error > 0.4);
    }
}
