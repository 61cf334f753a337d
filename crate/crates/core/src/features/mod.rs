//! Feature extraction, layout reshapes and the on-disk feature cache.

#[cfg(feature = "onnx")]
mod extract;
pub mod golden;
pub mod npy;
mod reshape;
mod store;

#[cfg(feature = "onnx")]
pub use extract::{Extractor, DEFAULT_BATCH, INPUT_CHW, OUTPUT_CHW};
pub use reshape::{reshape_features, FeatureTensor, Layout, ReshapedFeature, FEATURE_LEN};
pub use store::{sha256_hex, FeatureStore, StoreEntry, StoreMetadata, INDEX_FILE};
