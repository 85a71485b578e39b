//! Episode-granular replay storage with hindsight goal relabeling.
//!
//! Relabeling uses the "future" strategy: a sampled transition at step `t`
//! has, with probability `k / (k + 1)`, its desired goal replaced by the
//! achieved goal at a uniformly chosen step in `t + 1 ..= T` of the same
//! episode, and its reward recomputed.

use std::collections::VecDeque;

use rand::Rng;

use crate::env::{compute_reward, Observation, OBSERVATION_DIM};
use crate::error::{Error, Result};
use crate::rotation::UnitQuaternion;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: [f64; 3],
    pub reward: f64,
    pub next_observation: Observation,
    pub achieved_goal: UnitQuaternion,
    pub next_achieved_goal: UnitQuaternion,
    pub desired_goal: UnitQuaternion,
    pub episode_id: u64,
    pub step_index: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Episode {
    pub transitions: Vec<Transition>,
}

impl Episode {
    /// Checks the episode contract against an expected length and tolerance.
    pub fn validate(&self, length: usize, tolerance: f64) -> Result<()> {
        let t = &self.transitions;
        if t.len() != length {
            return Err(Error::InvalidInput(format!(
                "episode has {} transitions, expected {length}",
                t.len()
            )));
        }
        let id = t[0].episode_id;
        let desired = t[0].desired_goal;
        for (k, tr) in t.iter().enumerate() {
            if tr.episode_id != id || tr.step_index != k || tr.desired_goal != desired {
                return Err(Error::InvalidInput(format!("transition {k} breaks episode contract")));
            }
            if tr.reward != compute_reward(&tr.next_achieved_goal, &tr.desired_goal, tolerance) {
                return Err(Error::InvalidInput(format!("transition {k} has inconsistent reward")));
            }
            if let Some(next) = t.get(k + 1) {
                if next.observation != tr.next_observation || next.achieved_goal != tr.next_achieved_goal {
                    return Err(Error::InvalidInput(format!("transition {k} does not chain")));
                }
            }
        }
        Ok(())
    }
}

/// Compact episode: `T + 1` observations and achieved goals, `T` actions.
#[derive(Clone, Debug)]
struct StoredEpisode {
    id: u64,
    observations: Vec<[f64; OBSERVATION_DIM]>,
    raw_observations: Vec<Observation>,
    achieved: Vec<UnitQuaternion>,
    actions: Vec<[f64; 3]>,
    desired: UnitQuaternion,
}

impl StoredEpisode {
    fn len(&self) -> usize {
        self.actions.len()
    }
}

/// One draw from the buffer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledTransition {
    pub transition: Transition,
    /// Step whose achieved goal replaced the desired goal, when relabeled.
    pub goal_source_step: Option<usize>,
}

/// Where a sample comes from, before it is materialized.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SampleIndex {
    pub episode: usize,
    pub step: usize,
    pub future: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episode_length: usize,
    tolerance: f64,
    episodes: VecDeque<StoredEpisode>,
    size: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, episode_length: usize, tolerance: f64) -> Self {
        assert!(episode_length >= 1);
        ReplayBuffer {
            capacity,
            episode_length,
            tolerance,
            episodes: VecDeque::new(),
            size: 0,
        }
    }

    /// Stored transitions.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn episode_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.episodes.iter().map(|e| e.id)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn store_episode(&mut self, episode: &Episode) -> Result<()> {
        if episode.transitions.is_empty() {
            return Err(Error::InvalidInput("empty episode".into()));
        }
        episode.validate(self.episode_length, self.tolerance)?;
        let t = &episode.transitions;
        let mut raw_observations: Vec<Observation> = t.iter().map(|tr| tr.observation).collect();
        raw_observations.push(t[t.len() - 1].next_observation);
        let mut achieved: Vec<UnitQuaternion> = t.iter().map(|tr| tr.achieved_goal).collect();
        achieved.push(t[t.len() - 1].next_achieved_goal);
        self.episodes.push_back(StoredEpisode {
            id: t[0].episode_id,
            observations: raw_observations.iter().map(Observation::to_array).collect(),
            raw_observations,
            achieved,
            actions: t.iter().map(|tr| tr.action).collect(),
            desired: t[0].desired_goal,
        });
        self.size += t.len();
        while self.size > self.capacity {
            let old = self.episodes.pop_front().expect("size > 0 implies an episode");
            self.size -= old.len();
        }
        Ok(())
    }

    pub(crate) fn draw_index<R: Rng + ?Sized>(&self, her_k: usize, rng: &mut R) -> SampleIndex {
        let episode = rng.random_range(0..self.episodes.len());
        let len = self.episodes[episode].len();
        let step = rng.random_range(0..len);
        let relabel = her_k > 0 && rng.random_range(0..her_k + 1) < her_k;
        let future = relabel.then(|| rng.random_range(step + 1..=len));
        SampleIndex { episode, step, future }
    }

    /// Desired goal and reward implied by a draw.
    pub(crate) fn goal_and_reward(&self, idx: &SampleIndex) -> (UnitQuaternion, f64) {
        let ep = &self.episodes[idx.episode];
        let goal = idx.future.map_or(ep.desired, |f| ep.achieved[f]);
        let reward = compute_reward(&ep.achieved[idx.step + 1], &goal, self.tolerance);
        (goal, reward)
    }

    pub(crate) fn observation_arrays(
        &self,
        idx: &SampleIndex,
    ) -> (&[f64; OBSERVATION_DIM], &[f64; OBSERVATION_DIM], [f64; 3]) {
        let ep = &self.episodes[idx.episode];
        (
            &ep.observations[idx.step],
            &ep.observations[idx.step + 1],
            ep.actions[idx.step],
        )
    }

    fn materialize(&self, idx: SampleIndex) -> SampledTransition {
        let ep = &self.episodes[idx.episode];
        let (desired_goal, reward) = self.goal_and_reward(&idx);
        SampledTransition {
            transition: Transition {
                observation: ep.raw_observations[idx.step],
                action: ep.actions[idx.step],
                reward,
                next_observation: ep.raw_observations[idx.step + 1],
                achieved_goal: ep.achieved[idx.step],
                next_achieved_goal: ep.achieved[idx.step + 1],
                desired_goal,
                episode_id: ep.id,
                step_index: idx.step,
            },
            goal_source_step: idx.future,
        }
    }

    /// Uniform transitions, each relabeled with probability `her_k / (her_k + 1)`.
    pub fn sample_relabeled_batch<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        her_k: usize,
        rng: &mut R,
    ) -> Result<Vec<SampledTransition>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..batch_size)
            .map(|_| self.materialize(self.draw_index(her_k, rng)))
            .collect())
    }

    /// Achieved goal at `step` (0..=T) of the stored episode with `episode_id`.
    pub fn achieved_goal(&self, episode_id: u64, step: usize) -> Option<UnitQuaternion> {
        self.episodes
            .iter()
            .find(|e| e.id == episode_id)
            .and_then(|e| e.achieved.get(step).copied())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rotation::Axis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Synthetic episode: the cube turns about z by a fixed increment per step.
    pub(crate) fn synthetic_episode(id: u64, length: usize, rng: &mut ChaCha8Rng) -> Episode {
        let start = UnitQuaternion::random(rng);
        let inc: f64 = rng.random_range(-0.2..0.2);
        let desired = UnitQuaternion::random(rng);
        let pose = |k: usize| UnitQuaternion::axis_angle(Axis::Z, inc * k as f64) * start;
        let obs = |k: usize| Observation {
            orientation: pose(k),
            angular_velocity: [0.0, 0.0, inc],
            previous_action: [0.0; 3],
        };
        let transitions = (0..length)
            .map(|k| Transition {
                observation: obs(k),
                action: [0.0, 0.0, 0.5],
                reward: compute_reward(&pose(k + 1), &desired, 0.1),
                next_observation: obs(k + 1),
                achieved_goal: pose(k),
                next_achieved_goal: pose(k + 1),
                desired_goal: desired,
                episode_id: id,
                step_index: k,
            })
            .collect();
        Episode { transitions }
    }

    #[test]
    fn no_relabel_when_k_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReplayBuffer::new(10_000, 10, 0.1);
        let eps: Vec<Episode> = (0..5).map(|i| synthetic_episode(i, 10, &mut rng)).collect();
        for e in &eps {
            buf.store_episode(e).unwrap();
        }
        assert_eq!(buf.len(), 50);
        for s in buf.sample_relabeled_batch(500, 0, &mut rng).unwrap() {
            assert!(s.goal_source_step.is_none());
            let orig = eps[s.transition.episode_id as usize].transitions[0].desired_goal;
            assert_eq!(s.transition.desired_goal, orig);
        }
    }

    #[test]
    fn evicts_oldest_episode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let capacity = 35;
        let mut buf = ReplayBuffer::new(capacity, 10, 0.1);
        for i in 0..(capacity.div_ceil(10) as u64 + 1) {
            buf.store_episode(&synthetic_episode(i, 10, &mut rng)).unwrap();
        }
        assert!(buf.len() <= capacity);
        assert!(!buf.episode_ids().any(|id| id == 0));
    }

    #[test]
    fn rejects_broken_episodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut buf = ReplayBuffer::new(100, 10, 0.1);
        assert!(buf.store_episode(&Episode::default()).is_err());
        let mut short = synthetic_episode(0, 10, &mut rng);
        short.transitions.pop();
        assert!(buf.store_episode(&short).is_err());
        let mut bad = synthetic_episode(1, 10, &mut rng);
        bad.transitions[3].reward = if bad.transitions[3].reward == 0.0 { -1.0 } else { 0.0 };
        assert!(buf.store_episode(&bad).is_err());
        let mut gap = synthetic_episode(2, 10, &mut rng);
        gap.transitions[4].step_index = 7;
        assert!(buf.store_episode(&gap).is_err());
    }

    #[test]
    fn empty_buffer_errors() {
        let buf = ReplayBuffer::new(100, 10, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            buf.sample_relabeled_batch(4, 4, &mut rng),
            Err(Error::EmptyBuffer)
        ));
    }

    #[test]
    fn immediate_future_goal_is_rewarded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut buf = ReplayBuffer::new(1000, 10, 0.1);
        buf.store_episode(&synthetic_episode(0, 10, &mut rng)).unwrap();
        let mut seen = 0;
        for s in buf.sample_relabeled_batch(2000, 4, &mut rng).unwrap() {
            if s.goal_source_step == Some(s.transition.step_index + 1) {
                assert_eq!(s.transition.reward, 0.0);
                assert_eq!(s.transition.desired_goal, s.transition.next_achieved_goal);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }
}
