//! Quasimetric reinforcement learning core.
//!
//! Everything here is pure computation over in-memory data: a small
//! reverse-mode MLP substrate, the interval quasimetric critic, discrete
//! deterministic benchmark MDPs, exact shortest-path oracles, the
//! constrained quasimetric value learner, and temporal-difference baselines.
//! File formats, configuration files and the command line live in the `qrl`
//! companion crate.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod env;
pub mod error;
pub mod nn;
pub mod oracle;
pub mod qrl;
pub mod quasimetric;
pub mod real;
pub mod rng;
pub mod td;
pub mod tensor;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::Matrix;
