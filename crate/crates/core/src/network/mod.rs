//! Small ReLU feature extractor, RMSProp, and the training loop.

pub mod mlp;
pub mod optim;
pub mod train;

pub use mlp::{ForwardCache, Gradients, MlpModel};
pub use optim::{OptimizerState, RmsPropConfig};
pub use train::{train, BackgroundSource, EpochLoss, TrainConfig, TrainOutcome};
