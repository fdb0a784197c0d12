use rand::Rng;

use super::array::DenseArray;
use crate::scalar::Scalar;

/// Default half-width of the uniform weight initializer.
pub const INIT_SCALE: f64 = 0.05;

/// Values drawn uniformly from `(-scale, scale)`.
pub fn uniform<S: Scalar, R: Rng + ?Sized>(shape: &[usize], scale: f64, rng: &mut R) -> DenseArray<S> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| S::lit(rng.gen_range(-scale..scale))).collect();
    DenseArray::from_vec(shape, data).expect("shape product matches")
}
