//! Supervised heads over the learned embedding.

mod fc;
mod ridge;

pub use fc::{fc_train, FcClassifier, FcConfig};
pub use ridge::{
    default_gamma_grid, default_lambda_grid, gaussian_kernel, grid_search, kernel_matrix,
    log_grid, ridge_fit, GridResult, RidgeModel, RidgeParams,
};
