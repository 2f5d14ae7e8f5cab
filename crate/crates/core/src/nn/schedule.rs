use alloc::format;

use crate::error::{Error, Result};

/// Cosine decay from `base_lr` at step 0 to zero at `total_steps`, no restarts.
pub fn cosine_lr(step: u64, total_steps: u64, base_lr: f64) -> Result<f64> {
    if step > total_steps {
        return Err(Error::OutOfRange(format!(
            "step {step} beyond schedule length {total_steps}"
        )));
    }
    if total_steps == 0 {
        return Ok(base_lr);
    }
    let frac = step as f64 / total_steps as f64;
    Ok(base_lr * (1.0 + libm_cos(core::f64::consts::PI * frac)) / 2.0)
}

fn libm_cos(x: f64) -> f64 {
    num_traits::Float::cos(x)
}
