//! Linear and MLP scorers, Lipschitz losses, minibatch training and
//! Lipschitz-constant bounds.

mod checkpoint;
mod classifier;
mod gradcheck;
mod lipschitz;
mod loss;
mod train;

pub use checkpoint::Checkpoint;
pub use classifier::{Activation, Classifier, Layer};
pub use gradcheck::{grad_check, GradCheckReport};
pub use lipschitz::{lipschitz_upper_bound, spectral_norm};
pub use loss::{LossKind, LossSpec, Target};
pub use train::{empirical_loss, population_error, train_erm, Example, Metric, Optimizer, TrainConfig, TrainOutcome};
