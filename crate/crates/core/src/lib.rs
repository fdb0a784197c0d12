//! Long-document ranking by reinforced sentence selection followed by
//! fine-grained matching of the selected sentences.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the precision for common use.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gradients;
pub mod matcher;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod scalar;
pub mod selector;
pub mod trainer;

pub use error::{Error, ErrorCategory, Result};
pub use scalar::Scalar;

pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
pub type ParamSet64 = numeric::ParamSet<f64>;
pub type ParamSet32 = numeric::ParamSet<f32>;
