use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::env::{Obs, TransitionDataset, GOAL_TOKEN};
use crate::error::{Error, Result};

/// `Δt ≥ 1` with `P(Δt = k) = p (1 - p)^(k-1)`.
pub fn sample_horizon<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::OutOfRange(alloc::format!("geometric p = {p}")));
    }
    let g = Geometric::new(p).map_err(|_| Error::OutOfRange(alloc::format!("geometric p = {p}")))?;
    Ok(1 + g.sample(rng))
}

/// Hindsight goal for record `index`: the goal token with probability
/// `p_goal`, otherwise the state `Δt ~ Geometric(p)` steps ahead in the same
/// episode, truncated at the episode's last real transition.
///
/// `ends` is [`TransitionDataset::real_episode_ends`].
pub fn relabel_goal<R: Rng + ?Sized>(
    dataset: &TransitionDataset,
    ends: &[usize],
    index: usize,
    p: f64,
    p_goal: f64,
    rng: &mut R,
) -> Result<Obs> {
    let end = *ends
        .get(index)
        .ok_or_else(|| Error::OutOfRange(alloc::format!("record {index}")))?;
    if index >= end || !dataset.records[index].is_real() {
        return Err(Error::InvalidState(alloc::format!(
            "record {index} has no future state to relabel with"
        )));
    }
    if p_goal > 0.0 && rng.random::<f64>() < p_goal {
        return Ok(GOAL_TOKEN);
    }
    let dt = sample_horizon(p, rng)?;
    let j = index.saturating_add(dt as usize - 1).min(end - 1);
    Ok(dataset.records[j].s_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_dataset, MountainCar};
    use crate::rng;

    #[test]
    fn horizon_mean_is_inverse_p() {
        let mut r = rng::seeded(3);
        let n = 200_000;
        let mean = (0..n).map(|_| sample_horizon(0.3, &mut r).unwrap() as f64).sum::<f64>() / n as f64;
        // Standard error of the mean ≈ sqrt(0.7)/0.3/sqrt(n) ≈ 0.0062.
        assert!((mean - 1.0 / 0.3).abs() < 0.03, "{mean}");
        assert!((0..1000).all(|_| sample_horizon(1.0, &mut r).unwrap() == 1));
        assert!(sample_horizon(0.0, &mut r).is_err());
    }

    #[test]
    fn goals_come_from_the_same_episode_future() {
        let env = MountainCar::new(16).unwrap();
        let d = generate_dataset(&env, 30, 40, 5, 0.25).unwrap();
        let ends = d.real_episode_ends();
        let mut r = rng::seeded(1);
        for i in (0..d.len()).filter(|&i| d.records[i].is_real()) {
            for _ in 0..5 {
                let g = relabel_goal(&d, &ends, i, 0.3, 0.1, &mut r).unwrap();
                let ok = g == GOAL_TOKEN || (i..ends[i]).any(|j| d.records[j].s_next == g);
                assert!(ok);
            }
            // The last real record of an episode always relabels to its own next state.
            if ends[i] == i + 1 {
                assert_eq!(relabel_goal(&d, &ends, i, 0.3, 0.0, &mut r).unwrap(), d.records[i].s_next);
            }
        }
    }
}
