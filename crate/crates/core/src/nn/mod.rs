//! Tensors, standard layers, losses and the gradient checker.

pub mod activation;
pub mod blocks;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod layer;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod tensor;

pub use activation::{silu, silu_grad, Activation, ActivationLayer, Dropout};
pub use blocks::{Block, BlockOptions, Flatten, Sequential, Unflatten};
pub use conv::{conv_output_len, conv_transpose_output_len, Conv1d, ConvTranspose1d};
pub use gradcheck::{gradcheck, GradcheckOptions, GradcheckReport};
pub use layer::{param_count, zero_grad, Ctx, Layer, Param};
pub use linear::Linear;
pub use loss::{kl_divergence, kl_grad, mse_grad, mse_loss, LossValue};
pub use norm::BatchNorm1d;
pub use tensor::Tensor;
