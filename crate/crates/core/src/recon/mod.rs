//! Inverse maps from wall observations back to the hidden target.

pub mod adam;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod ridge;
pub mod train;
pub mod wiener;

pub use adam::Adam;
pub use linalg::{Cholesky, Matrix};
pub use loss::{composite_loss, composite_loss_with, loss_and_gradient, loss_gradient};
pub use model::{model_input, Dims, LinearReconstructor, MODEL_MAGIC, MODEL_VERSION};
pub use ridge::{fit_ridge, normal_equation_residual, RIDGE_RESIDUAL_TOL};
pub use train::{train_adam, train_adam_from, InitMode, TrainConfig, TrainOutcome, TrainSample};
pub use wiener::{wiener_deconvolve, Rect};
