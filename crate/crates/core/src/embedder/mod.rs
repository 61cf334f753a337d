//! Convolutional AE / VAE over reshaped feature tensors.

mod config;
mod loss;
mod model;
mod train;

pub use config::{EmbedderConfig, InputShape, Variant};
pub use loss::{kl_divergence, loss, reparametrize, LossParts};
pub use model::EmbedderModel;
pub use train::{encode, evaluate_loss, train, write_history, write_history_to, EpochStats};
