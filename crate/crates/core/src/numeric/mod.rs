//! Dense numeric primitives, the Adam optimizer, initialization, finite
//! difference checking and the checkpoint container.

pub mod adam;
pub mod array;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod ops;

pub use adam::{adam_step, clip_grad_norm, grad_norm, AdamConfig, LEARNING_RATE_GRID};
pub use array::{DenseArray, GradView, ParamId, ParamSet, ParamTensor};
pub use checkpoint::Checkpoint;
pub use conv::{conv2d_valid, conv2d_valid_backward, dynamic_max_pool, dynamic_max_pool_backward, Pooled};
pub use gradcheck::{grad_check, GradCheckReport};
pub use ops::{
    affine, affine_tanh, affine_tanh_backward, cosine, cosine_backward, gaussian_kernel, softmax,
    softmax_backward,
};
