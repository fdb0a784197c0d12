use std::path::Path;

use serde::{Deserialize, Serialize};

use super::array::{DenseArray, ParamSet};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "rltm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Versioned JSON container of named tensors. `model` carries whatever the
/// owner needs to rebuild the architecture before values are restored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub precision: String,
    pub vocab_hash: String,
    pub config_hash: String,
    pub seed: u64,
    pub model: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn capture<S: Scalar>(
        params: &ParamSet<S>,
        model: serde_json::Value,
        vocab_hash: &str,
        config_hash: &str,
        seed: u64,
    ) -> Result<Self> {
        if !params.all_finite() {
            return Err(Error::Numeric("refusing to checkpoint non-finite parameters".into()));
        }
        let tensors = params
            .iter()
            .map(|(name, t)| TensorRecord {
                name: name.to_owned(),
                shape: t.value.shape().to_vec(),
                values: t.value.as_slice().iter().map(|v| v.as_f64()).collect(),
            })
            .collect();
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            precision: S::NAME.into(),
            vocab_hash: vocab_hash.into(),
            config_hash: config_hash.into(),
            seed,
            model,
            tensors,
        })
    }

    pub fn check_vocab(&self, vocab_hash: &str) -> Result<()> {
        if self.vocab_hash != vocab_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash mismatch: checkpoint {} vs data {}",
                self.vocab_hash, vocab_hash
            )));
        }
        Ok(())
    }

    /// Copies values into a parameter set of identical names and shapes.
    pub fn restore_into<S: Scalar>(&self, params: &mut ParamSet<S>) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for rec in &self.tensors {
            let id = params
                .find(&rec.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor `{}`", rec.name)))?;
            if params.value(id).shape() != rec.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` has shape {:?}, model expects {:?}",
                    rec.name,
                    rec.shape,
                    params.value(id).shape()
                )));
            }
            let data = rec.values.iter().map(|&v| S::lit(v)).collect();
            *params.value_mut(id) = DenseArray::from_vec(&rec.shape, data)
                .map_err(|e| Error::Checkpoint(format!("tensor `{}`: {e}", rec.name)))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported format {} v{}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        ps.add("w", DenseArray::from_vec(&[2, 2], vec![0.1, -0.2, 1.0 / 3.0, 7e-9]).unwrap())
            .unwrap();
        ps.add("b", DenseArray::zeros(&[2])).unwrap();
        ps
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ps = params();
        let ck = Checkpoint::capture(&ps, serde_json::json!({"k": 1}), "vh", "ch", 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(ck, back);
        let mut target = params();
        target.value_mut(target.find("w").unwrap()).fill(0.0);
        back.restore_into(&mut target).unwrap();
        assert_eq!(target, ps);
    }

    #[test]
    fn rejects_mismatches() {
        let ck = Checkpoint::capture(&params(), serde_json::Value::Null, "vh", "ch", 0).unwrap();
        assert!(ck.check_vocab("other").is_err());
        let mut wrong = ParamSet::<f64>::new();
        wrong.add("w", DenseArray::zeros(&[4])).unwrap();
        wrong.add("b", DenseArray::zeros(&[2])).unwrap();
        assert!(matches!(ck.restore_into(&mut wrong), Err(Error::Checkpoint(_))));
    }
}
