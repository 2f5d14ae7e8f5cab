use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use super::{DiscreteEnv, Obs, GOAL_TOKEN};
use crate::error::Result;
use crate::rng;

/// Action index of synthetic goal-absorption records.
pub const GOAL_ACTION: i8 = -1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionRecord {
    pub s: Obs,
    pub a: i8,
    pub s_next: Obs,
    pub r: f32,
    pub episode: u32,
}

impl TransitionRecord {
    /// True for real environment transitions (not goal absorption).
    pub fn is_real(&self) -> bool {
        self.a >= 0
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    pub env_id: String,
    pub resolution: u32,
    pub policy: String,
    pub seed: u64,
    pub episodes: u32,
    pub max_episode_len: u32,
    pub goal_edge_cost: f32,
}

/// Offline transitions stored episode by episode. Within an episode, real
/// records come in time order; a goal-absorption record, if any, is last.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionDataset {
    pub meta: DatasetMeta,
    pub records: Vec<TransitionRecord>,
}

impl TransitionDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn real_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_real()).count()
    }

    pub fn goal_record_count(&self) -> usize {
        self.len() - self.real_count()
    }

    /// Start index of every episode, in order.
    pub fn episode_starts(&self) -> Vec<usize> {
        let mut starts = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if i == 0 || self.records[i - 1].episode != r.episode {
                starts.push(i);
            }
        }
        starts
    }

    /// For each record, one past the last real record of its episode.
    pub fn real_episode_ends(&self) -> Vec<usize> {
        let mut ends = alloc::vec![0; self.len()];
        let mut end = self.len();
        for i in (0..self.len()).rev() {
            let r = &self.records[i];
            if i + 1 == self.len() || self.records[i + 1].episode != r.episode {
                end = if r.is_real() { i + 1 } else { i };
            }
            ends[i] = end;
        }
        ends
    }
}

fn goal_record(s: Obs, cost: f32, episode: u32) -> TransitionRecord {
    TransitionRecord {
        s,
        a: GOAL_ACTION,
        s_next: GOAL_TOKEN,
        r: -cost,
        episode,
    }
}

/// Uniform-random-policy rollouts from uniformly random start states.
///
/// An episode ends when it enters the goal set (which appends a
/// goal-absorption record) or after `max_episode_len` steps. Episode `e`
/// draws from its own stream derived from `(seed, e)`.
pub fn generate_dataset<E: DiscreteEnv + ?Sized>(
    env: &E,
    episodes: u32,
    max_episode_len: u32,
    seed: u64,
    goal_edge_cost: f32,
) -> Result<TransitionDataset> {
    let mut records = Vec::new();
    for ep in 0..episodes {
        let mut rng = rng::substream(seed, ep as u64);
        let mut s = rng.random_range(0..env.num_states());
        let mut steps = 0;
        loop {
            if env.has_goal_token() && env.in_goal_set(s) {
                records.push(goal_record(env.observe(s), goal_edge_cost, ep));
                break;
            }
            if steps == max_episode_len {
                break;
            }
            let a = rng.random_range(0..env.num_actions());
            let next = env.step(s, a)?;
            records.push(TransitionRecord {
                s: env.observe(s),
                a: a as i8,
                s_next: env.observe(next),
                r: -1.0,
                episode: ep,
            });
            s = next;
            steps += 1;
        }
    }
    Ok(TransitionDataset {
        meta: DatasetMeta {
            env_id: env.id().to_string(),
            resolution: env.resolution() as u32,
            policy: "uniform_random".to_string(),
            seed,
            episodes,
            max_episode_len,
            goal_edge_cost,
        },
        records,
    })
}

/// Every (state, action) transition exactly once, each as its own episode,
/// plus goal-absorption records for goal-set states.
pub fn exhaustive_dataset<E: DiscreteEnv + ?Sized>(env: &E, goal_edge_cost: f32) -> Result<TransitionDataset> {
    let mut records = Vec::new();
    let mut ep = 0u32;
    for s in 0..env.num_states() {
        for a in 0..env.num_actions() {
            let next = env.step(s, a)?;
            records.push(TransitionRecord {
                s: env.observe(s),
                a: a as i8,
                s_next: env.observe(next),
                r: -1.0,
                episode: ep,
            });
            ep += 1;
        }
        if env.has_goal_token() && env.in_goal_set(s) {
            records.push(goal_record(env.observe(s), goal_edge_cost, ep));
            ep += 1;
        }
    }
    Ok(TransitionDataset {
        meta: DatasetMeta {
            env_id: env.id().to_string(),
            resolution: env.resolution() as u32,
            policy: "exhaustive".to_string(),
            seed: 0,
            episodes: ep,
            max_episode_len: 1,
            goal_edge_cost,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GridWorld, MountainCar};

    #[test]
    fn generation_is_deterministic_and_closed() {
        let env = MountainCar::new(32).unwrap();
        let a = generate_dataset(&env, 20, 250, 7, 0.25).unwrap();
        let b = generate_dataset(&env, 20, 250, 7, 0.25).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&env, 20, 250, 8, 0.25).unwrap();
        assert_ne!(a.records, c.records);
        for r in &a.records {
            assert!(env.state_of(&r.s).is_some());
            if r.is_real() {
                assert_eq!(r.r, -1.0);
                assert!(env.state_of(&r.s_next).is_some());
                let s = env.state_of(&r.s).unwrap();
                assert_eq!(env.observe(env.step(s, r.a as usize).unwrap()), r.s_next);
            } else {
                assert_eq!(r.s_next, GOAL_TOKEN);
                assert_eq!(r.r, -0.25);
                assert!(env.in_goal_set(env.state_of(&r.s).unwrap()));
            }
        }
    }

    #[test]
    fn episodes_end_at_goal_or_timeout() {
        let env = MountainCar::new(16).unwrap();
        let d = generate_dataset(&env, 50, 40, 3, 0.25).unwrap();
        let starts = d.episode_starts();
        for (i, &st) in starts.iter().enumerate() {
            let end = starts.get(i + 1).copied().unwrap_or(d.len());
            let ep = &d.records[st..end];
            let real = ep.iter().filter(|r| r.is_real()).count();
            assert!(real <= 40);
            // Only the last record may be a goal record.
            assert!(ep[..ep.len() - 1].iter().all(|r| r.is_real()));
            // Real transitions chain.
            for w in ep.windows(2) {
                if w[1].is_real() {
                    assert_eq!(w[0].s_next, w[1].s);
                }
            }
            if real < 40 {
                assert!(!ep.last().unwrap().is_real());
            }
        }
    }

    #[test]
    fn real_episode_ends() {
        let env = GridWorld::open(3, 3).unwrap();
        let d = generate_dataset(&env, 3, 4, 1, 0.25).unwrap();
        let ends = d.real_episode_ends();
        assert_eq!(&ends[0..4], &[4, 4, 4, 4]);
        assert_eq!(&ends[8..12], &[12, 12, 12, 12]);
    }

    #[test]
    fn exhaustive_covers_every_edge() {
        let env = GridWorld::open(4, 4).unwrap();
        let d = exhaustive_dataset(&env, 0.25).unwrap();
        assert_eq!(d.len(), 64);
        assert_eq!(d.goal_record_count(), 0);
    }
}
