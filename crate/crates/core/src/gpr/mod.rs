//! Gaussian-process regression of steering vectors.

pub mod dense;
pub mod factored;
pub mod model;
pub mod train;

pub use dense::DenseGp;
pub use factored::{FactoredGp, FactoredGrad};
pub use model::{GprModel, ModelKernel, ModelProvenance, Prediction, DEFAULT_PREDICTION_CAP};
pub use train::{fit, hybrid_coeffs, nll, nll_grad, oracle_model, pretrain, reg_loss, FitConfig, FitOutcome, FitReport};
