use alloc::vec;
use alloc::vec::Vec;

use crate::env::{DiscreteEnv, TransitionDataset};
use crate::error::{Error, Result};

/// Tabular goal-conditioned action values `Q[g][s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    pub num_states: usize,
    pub num_actions: usize,
    pub q: Vec<f64>,
    pub sweeps: usize,
}

impl TabularQ {
    pub fn get(&self, s: usize, a: usize, g: usize) -> f64 {
        self.q[(g * self.num_states + s) * self.num_actions + a]
    }

    /// `max_a Q(s, a; g)`.
    pub fn value(&self, s: usize, g: usize) -> f64 {
        (0..self.num_actions).map(|a| self.get(s, a, g)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(1 - γ^n) / (1 - γ)`: discounted cost of an `n`-step path with unit costs.
pub fn discounted_cost(n: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        n
    } else {
        (1.0 - gamma.powf(n)) / (1.0 - gamma)
    }
}

/// Synchronous TD backups `Q(s,a;g) ← r + γ [s' ≠ g] max_a' Q(s',a';g)` over
/// the dataset's real transitions, for every concrete goal, until the
/// largest change drops below `tol`.
pub fn tabular_td_fixed_point(
    env: &dyn DiscreteEnv,
    dataset: &TransitionDataset,
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<TabularQ> {
    let (n, na) = (env.num_states(), env.num_actions());
    let mut edges = Vec::new();
    for r in dataset.records.iter().filter(|r| r.is_real()) {
        let s = env
            .state_of(&r.s)
            .ok_or_else(|| Error::InvalidState(alloc::format!("{:?}", r.s)))?;
        let sn = env
            .state_of(&r.s_next)
            .ok_or_else(|| Error::InvalidState(alloc::format!("{:?}", r.s_next)))?;
        edges.push((s, r.a as usize, sn, r.r as f64));
    }
    // Unvisited (s, a) pairs stay at -∞ so they never win the max.
    let mut q = vec![f64::NEG_INFINITY; n * n * na];
    for g in 0..n {
        for &(s, a, _, _) in &edges {
            q[(g * n + s) * na + a] = 0.0;
        }
    }
    let mut t = TabularQ {
        num_states: n,
        num_actions: na,
        q,
        sweeps: 0,
    };
    while t.sweeps < max_sweeps {
        let mut next = t.q.clone();
        let mut delta: f64 = 0.0;
        for g in 0..n {
            for &(s, a, sn, r) in &edges {
                let boot = if sn == g { 0.0 } else { t.value(sn, g).max(-1e12) };
                let y = r + gamma * boot;
                let k = (g * n + s) * na + a;
                delta = delta.max((y - t.q[k]).abs());
                next[k] = y;
            }
        }
        t.q = next;
        t.sweeps += 1;
        if delta < tol {
            break;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{exhaustive_dataset, GridWorld};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_state_chain_geometric_series() {
        // 1 x 3 corridor: from cell 0 the goal cell 2 is two steps away.
        let env = GridWorld::open(3, 1).unwrap();
        let d = exhaustive_dataset(&env, 0.25).unwrap();
        let t = tabular_td_fixed_point(&env, &d, 0.95, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(t.value(0, 2), -(1.0 + 0.95), epsilon = 1e-9);
        assert_abs_diff_eq!(t.value(1, 2), -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(discounted_cost(2.0, 0.95), 1.95, epsilon = 1e-12);
        assert_abs_diff_eq!(discounted_cost(5.0, 1.0), 5.0);
    }

    #[test]
    fn gamma_zero_gives_one_step_reward() {
        let env = GridWorld::open(3, 3).unwrap();
        let d = exhaustive_dataset(&env, 0.25).unwrap();
        let t = tabular_td_fixed_point(&env, &d, 0.0, 1e-12, 100).unwrap();
        for s in 0..9 {
            for g in 0..9 {
                if s != g {
                    assert_eq!(t.value(s, g), -1.0);
                }
            }
        }
    }
}
