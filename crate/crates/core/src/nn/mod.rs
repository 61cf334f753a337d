//! Minimal trainable-layer toolkit: convolution, transposed convolution,
//! dense, ReLU, reverse-mode gradients and the SGD/Adam optimizers.
//!
//! Layers are generic over [`Scalar`] so the same code trains in `f32` and is
//! gradient-checked in `f64`.

pub mod checkpoint;
mod conv;
mod dense;
mod layer;
mod optim;
mod param;
mod scalar;
mod tensor;

pub use checkpoint::{Checkpoint, NamedArray};
pub use conv::{Conv2d, ConvGeometry, ConvTranspose2d};
pub use dense::Dense;
pub use layer::{Layer, Relu, Reshape, Sequential};
pub use optim::{Optimizer, OptimizerKind};
pub use param::Param;
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor4;

/// Converts a parameter vector to `f32` for checkpointing.
pub fn to_f32<T: Scalar>(v: &[T]) -> Vec<f32> {
    v.iter().map(|x| x.to_f32().unwrap_or(f32::NAN)).collect()
}
