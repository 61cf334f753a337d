//! Unsupervised embedding and clustering of plankton images.
//!
//! The pipeline has three stages:
//!
//! 1. [`features`]: a frozen ImageNet-pretrained CNN (an ONNX graph) turns each
//!    preprocessed 128×128 image into a `(1920, 4, 4)` activation tensor, which
//!    is relabeled into a flatter layout (`r1 = (30,32,32)` or `r2 = (3,32,320)`).
//! 2. [`embedder`]: a convolutional autoencoder or variational autoencoder is
//!    trained on those tensors and its bottleneck (or posterior mean) is used
//!    as a low-dimensional embedding.
//! 3. [`clustering`]: fuzzy c-means groups the embeddings; [`metrics`] scores
//!    the grouping with purity and the number of class overlaps.
//!
//! [`supervised`] adds kernel ridge and fully-connected classification heads on
//! top of the embedding, and [`experiment`] drives the whole protocol from a
//! TOML config.

pub mod clustering;
pub mod data;
pub mod embedder;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod nn;
pub mod supervised;

pub use error::{Error, Result};
