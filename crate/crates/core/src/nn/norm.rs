use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::{Matrix, Real};

/// Fixed (non-trainable) per-dimension affine input map `(x - shift) * scale`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InputNorm {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl InputNorm {
    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        check_len("input norm", shift.len(), scale.len())?;
        if scale.iter().any(|s| !s.is_finite() || *s == 0.0) || shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidSpec("input normalization must be finite with nonzero scale"));
        }
        Ok(Self { shift, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply<T: Real>(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        check_len("input norm width", self.dim(), x.cols())?;
        let mut out = x.clone();
        let shift: Vec<T> = self.shift.iter().map(|&v| T::of(v)).collect();
        let scale: Vec<T> = self.scale.iter().map(|&v| T::of(v)).collect();
        for r in 0..out.rows() {
            for ((v, &s), &k) in out.row_mut(r).iter_mut().zip(&shift).zip(&scale) {
                *v = (*v - s) * k;
            }
        }
        Ok(out)
    }
}
