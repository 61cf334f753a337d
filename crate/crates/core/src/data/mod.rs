//! Dataset manifests, image preprocessing and reproducible splits.

mod manifest;
mod preprocess;
mod split;

pub use manifest::{Manifest, ManifestEntry, SplitHint};
pub use preprocess::{
    load_image, preprocess, preprocess_file, resize_bilinear, ImageTensor, IMAGENET_MEAN,
    IMAGENET_STD, INPUT_SIZE,
};
pub use split::{make_splits, redraw_folds, SplitPlan};
