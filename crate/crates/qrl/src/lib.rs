//! Command-line pipeline, on-disk formats and the acceptance suite built on
//! `qrl-core`.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod format;
pub mod io;
pub mod pipeline;
