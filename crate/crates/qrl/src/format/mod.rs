//! On-disk formats.

pub mod checkpoint;
pub mod dataset;
pub mod grid;

pub use checkpoint::{checkpoint_bytes, parse_checkpoint, read_checkpoint, write_checkpoint, EnvTag, Model};
pub use dataset::{dataset_bytes, parse_dataset, read_dataset, write_dataset};
pub use grid::{read_grid, write_distance_matrix, write_state_grid};
