//! Fine-grained sentence matchers over term-level similarity matrices and
//! the summing aggregation across selected units.

pub mod knrm;
pub mod matrix;
pub mod pyramid;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use knrm::{kernel_features, kernel_features_backward, KernelBank, KernelFeatures, KnrmParams};
pub use matrix::{matching_matrix, matching_matrix_backward, MatchingMatrix};
pub use pyramid::{PyramidConfig, PyramidParams};

use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::numeric::{DenseArray, GradView, ParamId, ParamSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherKind {
    #[default]
    Knrm,
    MatchPyramid,
}

impl MatcherKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Knrm => "knrm",
            Self::MatchPyramid => "matchpyramid",
        }
    }
}

impl std::str::FromStr for MatcherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knrm" => Ok(Self::Knrm),
            "matchpyramid" => Ok(Self::MatchPyramid),
            _ => Err(Error::InvalidConfig(format!(
                "unknown matcher `{s}` (expected knrm or matchpyramid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub kind: MatcherKind,
    pub bank: KernelBank,
    pub pyramid: PyramidConfig,
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            MatcherKind::Knrm => self.bank.validate(),
            MatcherKind::MatchPyramid => self.pyramid.validate(),
        }
    }
}

/// Parameters of whichever matcher is configured.
#[derive(Debug, Clone, PartialEq)]
pub enum Matcher {
    Knrm(KnrmParams),
    Pyramid(PyramidParams),
}

impl Matcher {
    pub fn register<S: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<S>,
        config: &MatcherConfig,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match config.kind {
            MatcherKind::Knrm => Self::Knrm(KnrmParams::register(params, config.bank.clone(), rng)?),
            MatcherKind::MatchPyramid => {
                Self::Pyramid(PyramidParams::register(params, config.pyramid.clone(), rng)?)
            }
        })
    }

    pub fn kind(&self) -> MatcherKind {
        match self {
            Self::Knrm(_) => MatcherKind::Knrm,
            Self::Pyramid(_) => MatcherKind::MatchPyramid,
        }
    }

    /// Matcher-owned tensors, excluding the embedding table.
    pub fn ids(&self) -> Vec<ParamId> {
        match self {
            Self::Knrm(p) => p.ids(),
            Self::Pyramid(p) => p.ids(),
        }
    }

    pub fn score_matrix<S: Scalar>(&self, params: &ParamSet<S>, m: &MatchingMatrix<S>) -> Result<S> {
        match self {
            Self::Knrm(p) => Ok(p.score(params, m)),
            Self::Pyramid(p) => p.score(params, m),
        }
    }

    /// `Ψ(q, u)`.
    pub fn psi<S: Scalar>(
        &self,
        params: &ParamSet<S>,
        embeddings: &DenseArray<S>,
        query: &[TokenId],
        sentence: &[TokenId],
    ) -> Result<S> {
        let m = matching_matrix(query, sentence, embeddings);
        self.score_matrix(params, &m)
    }

    /// Accumulates `g · ∇Ψ(q, u)`, including the embedding rows when
    /// `update_embeddings` is set.
    pub fn psi_backward<S: Scalar>(
        &self,
        view: &mut GradView<'_, S>,
        embeddings: ParamId,
        update_embeddings: bool,
        query: &[TokenId],
        sentence: &[TokenId],
        g: S,
    ) -> Result<()> {
        let emb = view.value(embeddings);
        let m = matching_matrix(query, sentence, emb);
        let d_m = match self {
            Self::Knrm(p) => p.backward(view, &m, g),
            Self::Pyramid(p) => p.backward(view, &m, g)?,
        };
        if update_embeddings {
            matching_matrix_backward(query, sentence, emb, &m, &d_m, view.grad(embeddings));
        }
        Ok(())
    }
}

/// `Λ`: the sum of per-unit scores.
pub fn aggregate<S: Scalar>(scores: &[S]) -> Result<S> {
    if scores.is_empty() {
        return Err(Error::Dimension("aggregate needs at least one score".into()));
    }
    Ok(scores.iter().copied().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_sums() {
        assert_eq!(aggregate(&[0.5f64]).unwrap(), 0.5);
        assert!((aggregate(&[1.2f64, -0.2, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(aggregate::<f64>(&[]).is_err());
    }

    #[test]
    fn kind_round_trips() {
        for k in [MatcherKind::Knrm, MatcherKind::MatchPyramid] {
            assert_eq!(k.as_str().parse::<MatcherKind>().unwrap(), k);
        }
        assert!("drmm".parse::<MatcherKind>().is_err());
    }
}
