use alloc::vec::Vec;

use rand::Rng;

use crate::env::{Obs, TransitionDataset, GOAL_TOKEN};
use crate::error::{Error, Result};

/// Indices of `batch_size` records drawn uniformly with replacement.
pub fn sample_transitions<R: Rng + ?Sized>(
    dataset: &TransitionDataset,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok((0..batch_size).map(|_| rng.random_range(0..dataset.len())).collect())
}

/// Goals: the goal token with probability `p_goal`, otherwise the resulting
/// state of a uniformly random record.
pub fn sample_goals<R: Rng + ?Sized>(
    dataset: &TransitionDataset,
    batch_size: usize,
    p_goal: f64,
    rng: &mut R,
) -> Result<Vec<Obs>> {
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok((0..batch_size)
        .map(|_| {
            if rng.random::<f64>() < p_goal {
                GOAL_TOKEN
            } else {
                dataset.records[rng.random_range(0..dataset.len())].s_next
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_dataset, MountainCar};
    use crate::rng;

    fn data() -> TransitionDataset {
        generate_dataset(&MountainCar::new(16).unwrap(), 5, 50, 1, 0.25).unwrap()
    }

    #[test]
    fn goal_mix_extremes() {
        let d = data();
        let mut r = rng::seeded(0);
        let none = sample_goals(&d, 500, 0.0, &mut r).unwrap();
        let real_next: Vec<Obs> = d.records.iter().map(|x| x.s_next).collect();
        assert!(none.iter().all(|g| real_next.contains(g)));
        let all = sample_goals(&d, 500, 1.0, &mut r).unwrap();
        assert!(all.iter().all(|g| *g == GOAL_TOKEN));
    }

    #[test]
    fn goal_token_fraction_concentrates() {
        // Gridworld data never produces the token on its own.
        let env = crate::env::GridWorld::open(4, 4).unwrap();
        let d = generate_dataset(&env, 5, 20, 2, 0.25).unwrap();
        let goals = sample_goals(&d, 100_000, 0.05, &mut rng::seeded(3)).unwrap();
        let frac = goals.iter().filter(|g| **g == GOAL_TOKEN).count() as f64 / 1e5;
        assert!((frac - 0.05).abs() < 0.005, "{frac}");
    }

    #[test]
    fn empty_dataset_errors() {
        let mut d = data();
        d.records.clear();
        assert!(sample_goals(&d, 3, 0.5, &mut rng::seeded(0)).is_err());
        assert!(sample_transitions(&d, 3, &mut rng::seeded(0)).is_err());
    }
}
