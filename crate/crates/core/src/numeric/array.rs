use sha2::{Digest, Sha256};

use crate::corpus::vocab::hex_digest;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> DenseArray<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![S::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn filled(shape: &[usize], v: S) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    /// Rows of a 2-D array (first dimension for higher ranks).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Product of all but the first dimension.
    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, r: usize) -> &[S] {
        let w = self.row_len();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        let w = self.row_len();
        &mut self.data[r * w..(r + 1) * w]
    }

    pub fn fill(&mut self, v: S) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Dimension(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

/// A trainable tensor with its gradient slot and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<S> {
    pub value: DenseArray<S>,
    pub grad: DenseArray<S>,
    pub adam_m: DenseArray<S>,
    pub adam_v: DenseArray<S>,
    pub step_count: u64,
}

impl<S: Scalar> ParamTensor<S> {
    pub fn new(value: DenseArray<S>) -> Self {
        let z = DenseArray::zeros(value.shape());
        Self {
            grad: z.clone(),
            adam_m: z.clone(),
            adam_v: z,
            value,
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(S::zero());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of every trainable tensor of a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<S> {
    names: Vec<String>,
    tensors: Vec<ParamTensor<S>>,
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, value: DenseArray<S>) -> Result<ParamId> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::InvalidConfig(format!("duplicate parameter `{name}`")));
        }
        self.names.push(name.to_owned());
        self.tensors.push(ParamTensor::new(value));
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &DenseArray<S> {
        &self.tensors[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseArray<S> {
        &mut self.tensors[id.0].value
    }

    pub fn tensor(&self, id: ParamId) -> &ParamTensor<S> {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut ParamTensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamTensor<S>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(ParamTensor::zero_grad);
    }

    /// Splits the set into read-only values and writable gradient slots.
    pub fn grad_view(&mut self) -> GradView<'_, S> {
        let (values, grads) = self
            .tensors
            .iter_mut()
            .map(|t| (&t.value, &mut t.grad))
            .unzip();
        GradView { values, grads }
    }

    /// Hex SHA-256 over the bit patterns of the selected tensors' values.
    pub fn checksum(&self, ids: &[ParamId]) -> String {
        let mut h = Sha256::new();
        for id in ids {
            h.update(self.names[id.0].as_bytes());
            for v in self.tensors[id.0].value.as_slice() {
                h.update(v.as_f64().to_bits().to_le_bytes());
            }
        }
        hex_digest(h)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.value.all_finite())
    }
}

/// Simultaneous access to parameter values and gradient buffers.
pub struct GradView<'a, S> {
    values: Vec<&'a DenseArray<S>>,
    grads: Vec<&'a mut DenseArray<S>>,
}

impl<'a, S: Scalar> GradView<'a, S> {
    pub fn value(&self, id: ParamId) -> &'a DenseArray<S> {
        self.values[id.0]
    }

    pub fn grad(&mut self, id: ParamId) -> &mut [S] {
        self.grads[id.0].as_mut_slice()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_count() {
        assert!(DenseArray::<f64>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let a = DenseArray::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(a.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn param_set_view_and_checksum() {
        let mut ps = ParamSet::<f64>::new();
        let a = ps.add("a", DenseArray::filled(&[2], 1.0)).unwrap();
        let b = ps.add("b", DenseArray::filled(&[3], 2.0)).unwrap();
        assert!(ps.add("a", DenseArray::zeros(&[1])).is_err());
        let before = ps.checksum(&[a]);
        {
            let mut view = ps.grad_view();
            let va = view.value(a);
            view.grad(b)[0] += va.as_slice()[0];
        }
        assert_eq!(ps.tensor(b).grad.as_slice()[0], 1.0);
        assert_eq!(ps.checksum(&[a]), before);
        ps.value_mut(a).as_mut_slice()[0] = 5.0;
        assert_ne!(ps.checksum(&[a]), before);
    }
}
