use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid network spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid action {action} (environment has {num_actions} actions)")]
    InvalidAction { action: i64, num_actions: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("negative component distance {0}")]
    NegativeInput(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty mask: no reachable pairs to compare")]
    EmptyMask,
    #[error("matrix is not a quasimetric ({0} violations)")]
    NotQuasimetric(usize),
    #[error("training diverged at step {step}: {what}")]
    Divergence { step: u64, what: String },
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            context,
            expected,
            found,
        })
    }
}
