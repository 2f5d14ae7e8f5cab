use alloc::format;

use super::{DiscreteEnv, Obs};
use crate::error::{Error, Result};
use crate::nn::InputNorm;

pub const POSITION_RANGE: (f64, f64) = (-1.2, 0.6);
pub const VELOCITY_RANGE: (f64, f64) = (-0.07, 0.07);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    pub fn new(position: f64, velocity: f64) -> Self {
        Self { position, velocity }
    }
}

/// Classic MountainCar update with clipping and the inelastic left wall.
/// Every step costs 1 (reward -1).
pub fn mountain_car_step(state: MountainCarState, action: usize) -> Result<(MountainCarState, f64)> {
    if action > 2 {
        return Err(Error::InvalidAction {
            action: action as i64,
            num_actions: 3,
        });
    }
    let force = action as f64 - 1.0;
    let mut v = state.velocity + 0.001 * force - 0.0025 * (3.0 * state.position).cos();
    v = v.clamp(VELOCITY_RANGE.0, VELOCITY_RANGE.1);
    let p = (state.position + v).clamp(POSITION_RANGE.0, POSITION_RANGE.1);
    if p == POSITION_RANGE.0 && v < 0.0 {
        v = 0.0;
    }
    Ok((MountainCarState::new(p, v), -1.0))
}

/// Top of the hill: position in [0.5, 0.6] and velocity in [0, 0.07].
pub fn in_goal_set(state: MountainCarState) -> bool {
    (0.5..=0.6).contains(&state.position) && (0.0..=0.07).contains(&state.velocity)
}

/// Snaps `x` to the nearest of `bins` evenly spaced centers spanning
/// `[lo, hi]` (both ends are centers). Returns the center and its index.
pub fn discretize_value(x: f64, lo: f64, hi: f64, bins: usize) -> (f64, usize) {
    let last = bins - 1;
    let k = ((x - lo) / (hi - lo) * last as f64).round();
    let k = if k.is_nan() { 0 } else { k.clamp(0.0, last as f64) as usize };
    (bin_center(k, lo, hi, bins), k)
}

fn bin_center(k: usize, lo: f64, hi: f64, bins: usize) -> f64 {
    if k + 1 == bins {
        hi
    } else {
        lo + (hi - lo) * k as f64 / (bins - 1) as f64
    }
}

pub fn discretize(state: MountainCarState, bins: usize) -> MountainCarState {
    let (p, _) = discretize_value(state.position, POSITION_RANGE.0, POSITION_RANGE.1, bins);
    let (v, _) = discretize_value(state.velocity, VELOCITY_RANGE.0, VELOCITY_RANGE.1, bins);
    MountainCarState::new(p, v)
}

/// MountainCar on a `bins × bins` grid, with the top-of-hill goal token.
///
/// State index is `position_bin * bins + velocity_bin`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MountainCar {
    bins: usize,
}

impl MountainCar {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::OutOfRange(format!("need at least 2 bins, got {bins}")));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn state(&self, index: usize) -> MountainCarState {
        let (pk, vk) = (index / self.bins, index % self.bins);
        MountainCarState::new(
            bin_center(pk, POSITION_RANGE.0, POSITION_RANGE.1, self.bins),
            bin_center(vk, VELOCITY_RANGE.0, VELOCITY_RANGE.1, self.bins),
        )
    }

    pub fn index(&self, state: MountainCarState) -> usize {
        let (_, pk) = discretize_value(state.position, POSITION_RANGE.0, POSITION_RANGE.1, self.bins);
        let (_, vk) = discretize_value(state.velocity, VELOCITY_RANGE.0, VELOCITY_RANGE.1, self.bins);
        pk * self.bins + vk
    }
}

impl DiscreteEnv for MountainCar {
    fn id(&self) -> &'static str {
        "mountaincar"
    }

    fn resolution(&self) -> usize {
        self.bins
    }

    fn num_states(&self) -> usize {
        self.bins * self.bins
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn step(&self, state: usize, action: usize) -> Result<usize> {
        if state >= self.num_states() {
            return Err(Error::InvalidState(format!("mountaincar state {state}")));
        }
        let (next, _) = mountain_car_step(self.state(state), action)?;
        Ok(self.index(next))
    }

    fn observe(&self, state: usize) -> Obs {
        let s = self.state(state);
        [s.position as f32, s.velocity as f32, 0.0]
    }

    fn state_of(&self, obs: &Obs) -> Option<usize> {
        if obs[2] != 0.0 {
            return None;
        }
        let idx = self.index(MountainCarState::new(obs[0] as f64, obs[1] as f64));
        (self.observe(idx) == *obs).then_some(idx)
    }

    fn in_goal_set(&self, state: usize) -> bool {
        in_goal_set(self.state(state))
    }

    fn has_goal_token(&self) -> bool {
        true
    }

    fn input_norm(&self) -> InputNorm {
        let (pl, ph) = POSITION_RANGE;
        let (vl, vh) = VELOCITY_RANGE;
        InputNorm::new(
            alloc::vec![(pl + ph) / 2.0, (vl + vh) / 2.0, 0.0],
            alloc::vec![2.0 / (ph - pl), 2.0 / (vh - vl), 1.0],
        )
        .expect("three dimensions")
    }

    fn grid_coords(&self, state: usize) -> (usize, usize) {
        (state / self.bins, state % self.bins)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn step_formula() {
        let (n, r) = mountain_car_step(MountainCarState::new(-0.5, 0.0), 1).unwrap();
        let v = -0.0025 * (-1.5f64).cos();
        assert_abs_diff_eq!(n.velocity, v, epsilon = 1e-15);
        assert_abs_diff_eq!(n.velocity, -1.7684e-4, epsilon = 1e-8);
        assert_abs_diff_eq!(n.position, -0.5 + v, epsilon = 1e-15);
        assert_abs_diff_eq!(n.position, -0.50018, epsilon = 1e-5);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn walls_and_clipping() {
        let (n, _) = mountain_car_step(MountainCarState::new(-1.2, -0.05), 0).unwrap();
        assert_eq!(n.position, -1.2);
        assert_eq!(n.velocity, 0.0);
        let (n, _) = mountain_car_step(MountainCarState::new(0.6, 0.07), 2).unwrap();
        assert_eq!(n.position, 0.6);
        assert!(n.velocity <= 0.07);
        assert!(mountain_car_step(MountainCarState::new(0.0, 0.0), 3).is_err());
    }

    #[test]
    fn goal_set() {
        assert!(in_goal_set(MountainCarState::new(0.55, 0.01)));
        assert!(!in_goal_set(MountainCarState::new(0.55, -0.01)));
        assert!(!in_goal_set(MountainCarState::new(0.49, 0.0)));
    }

    #[test]
    fn discretization_endpoints_and_nearest_center() {
        let (lo, hi) = POSITION_RANGE;
        assert_eq!(discretize_value(-1.2, lo, hi, 160), (-1.2, 0));
        assert_eq!(discretize_value(0.6, lo, hi, 160), (0.6, 159));
        // Spacing 1.8/159 ≈ 0.011321, so -1.195 is nearer to -1.2 than to -1.18868.
        assert_eq!(discretize_value(-1.195, lo, hi, 160), (-1.2, 0));
        let (c, k) = discretize_value(-1.19, lo, hi, 160);
        assert_eq!(k, 1);
        assert_abs_diff_eq!(c, -1.2 + 1.8 / 159.0, epsilon = 1e-15);
    }

    #[test]
    fn discretization_is_idempotent() {
        for i in 0..500 {
            let s = MountainCarState::new(-1.3 + i as f64 * 0.004, -0.08 + i as f64 * 0.0003);
            let d = discretize(s, 64);
            assert_eq!(discretize(d, 64), d);
        }
    }

    #[test]
    fn discrete_env_round_trips_observations() {
        let env = MountainCar::new(64).unwrap();
        for s in [0, 1, 63, 64, 2000, 4095] {
            assert_eq!(env.state_of(&env.observe(s)), Some(s));
        }
        assert_eq!(env.state_of(&super::super::GOAL_TOKEN), None);
        assert!(MountainCar::new(1).is_err());
    }
}
