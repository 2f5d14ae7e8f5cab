use alloc::vec::Vec;

use crate::env::{Obs, TransitionRecord};
use crate::error::{check_len, Error, Result};
use crate::nn::{sigmoid, softplus};
use crate::quasimetric::QuasimetricCritic;
use crate::{Matrix, Real};

/// Monotone concave reweighting of distances: `-softplus(c - x, β)`.
pub fn phi(x: f64, offset: f64, beta: f64) -> f64 {
    -softplus(offset - x, beta)
}

pub fn phi_grad(x: f64, offset: f64, beta: f64) -> f64 {
    sigmoid(beta * (offset - x))
}

pub(crate) fn obs_matrix<'a, T: Real>(obs: impl IntoIterator<Item = &'a Obs>) -> Matrix<T> {
    let data: Vec<T> = obs
        .into_iter()
        .flat_map(|o| o.iter().map(|&x| T::of(x as f64)))
        .collect();
    let rows = data.len() / 3;
    Matrix::from_vec(rows, 3, data).expect("three columns")
}

/// `d(s, s') + r` for each record.
pub fn edge_overshoots<T: Real>(
    critic: &QuasimetricCritic<T>,
    records: &[TransitionRecord],
) -> Result<Vec<f64>> {
    let s = obs_matrix::<T>(records.iter().map(|r| &r.s));
    let sn = obs_matrix::<T>(records.iter().map(|r| &r.s_next));
    let d = critic.state_distances(&s, &sn)?;
    Ok(d.iter().zip(records).map(|(d, r)| d.as_f64() + r.r as f64).collect())
}

/// `E[relu(d(s, s') + r)²]` over a batch of records.
pub fn constraint_term<T: Real>(
    critic: &QuasimetricCritic<T>,
    records: &[TransitionRecord],
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let o = edge_overshoots(critic, records)?;
    Ok(o.iter().map(|&x| x.max(0.0).powi(2)).sum::<f64>() / o.len() as f64)
}

/// `E[φ(d(s, g))]` over aligned states and goals.
pub fn pull_term<T: Real>(
    critic: &QuasimetricCritic<T>,
    states: &[Obs],
    goals: &[Obs],
    offset: f64,
    beta: f64,
) -> Result<f64> {
    check_len("pull_term goals", states.len(), goals.len())?;
    if states.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = critic.state_distances(&obs_matrix(states), &obs_matrix(goals))?;
    Ok(d.iter().map(|x| phi(x.as_f64(), offset, beta)).sum::<f64>() / d.len() as f64)
}

/// `E[½ (d^z(ẑ', z')² + d^z(z', ẑ')²)]` over records with a real action;
/// zero when there are none.
pub fn transition_loss<T: Real>(
    critic: &QuasimetricCritic<T>,
    records: &[TransitionRecord],
) -> Result<f64> {
    let real: Vec<&TransitionRecord> = records.iter().filter(|r| r.is_real()).collect();
    if real.is_empty() {
        return Ok(0.0);
    }
    let z = critic.encode(&obs_matrix(real.iter().map(|r| &r.s)))?;
    let zn = critic.encode(&obs_matrix(real.iter().map(|r| &r.s_next)))?;
    let actions: Vec<usize> = real.iter().map(|r| r.a as usize).collect();
    let zhat = critic.transition_batch(&z, &actions)?;
    let fwd = critic.latent_distances(&zhat, &zn)?;
    let bwd = critic.latent_distances(&zn, &zhat)?;
    let total: f64 = fwd
        .iter()
        .zip(&bwd)
        .map(|(a, b)| 0.5 * (a.as_f64().powi(2) + b.as_f64().powi(2)))
        .sum();
    Ok(total / real.len() as f64)
}
