//! Minimal reverse-mode substrate: dense ReLU MLPs with an explicit tape,
//! Adam, and the cosine learning-rate schedule.

mod activation;
mod adam;
mod mlp;
mod norm;
mod schedule;

pub use activation::{sigmoid, softplus, softplus_grad, softplus_inverse};
pub use adam::{AdamConfig, AdamState};
pub use mlp::{Activation, MlpParams, MlpSpec, MlpTape};
pub use norm::InputNorm;
pub use schedule::cosine_lr;
