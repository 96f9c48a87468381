//! Training infrastructure: configuration, Adam, the differentiable
//! per-variant pipeline graphs, the training loop, and oracle-mask
//! classical enhancement for comparison baselines.

pub mod adam;
pub mod config;
pub mod oracle;
pub mod pipeline;
pub mod trainer;

pub use config::{ModelConfig, TrainConfig, TrainLoopConfig, Variant};
pub use pipeline::{Model, ScenePack};
pub use trainer::{train, validate, TrainOutcome};
