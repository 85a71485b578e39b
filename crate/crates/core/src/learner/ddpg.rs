//! Deterministic-policy-gradient actor-critic with target networks.

use ndarray::{s, Array1, Array2, Axis as NdAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::{Activation, Adam, Gradients, Mlp, Scalar};
use super::normalizer::Normalizer;
use super::replay::ReplayBuffer;
use crate::env::{EnvConfig, Observation, TaskKind, ACTION_DIM, GOAL_DIM, OBSERVATION_DIM};
use crate::error::{Error, Result};
use crate::policy::GoalPolicy;
use crate::rotation::UnitQuaternion;

pub const ACTOR_INPUT: usize = OBSERVATION_DIM + GOAL_DIM;
pub const CRITIC_INPUT: usize = ACTOR_INPUT + ACTION_DIM;

/// Training precision of policy networks.
pub type Net = Mlp<f32>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_timesteps: usize,
    pub cycle_episodes: usize,
    pub updates_per_cycle: usize,
    pub batch_size: usize,
    pub gamma: f64,
    /// `target <- polyak * target + (1 - polyak) * main`, once per cycle.
    pub polyak: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub her_k: usize,
    pub noise_sigma: f64,
    pub random_eps: f64,
    /// Penalty on the squared actor output.
    pub action_l2: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub norm_clip: f64,
    pub norm_eps: f64,
    /// Held-out goals evaluated after each cycle.
    pub eval_goals: usize,
    /// Return the best-evaluated snapshot instead of the last one.
    pub keep_best: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_timesteps: 2_000_000,
            cycle_episodes: 50,
            updates_per_cycle: 40,
            batch_size: 256,
            gamma: 0.98,
            polyak: 0.95,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            her_k: 4,
            noise_sigma: 0.2,
            random_eps: 0.3,
            action_l2: 1.0,
            hidden: vec![256, 256, 256],
            buffer_capacity: 1_000_000,
            norm_clip: 5.0,
            norm_eps: 0.01,
            eval_goals: 100,
            keep_best: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, episode_length: usize) -> Result<()> {
        if self.cycle_episodes == 0 || self.batch_size == 0 || self.hidden.is_empty() {
            return Err(Error::Config(
                "cycle_episodes, batch_size and hidden must be nonzero".into(),
            ));
        }
        if self.total_timesteps < self.cycle_episodes * episode_length {
            return Err(Error::Config(format!(
                "total_timesteps {} is less than one cycle ({} x {episode_length})",
                self.total_timesteps, self.cycle_episodes
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.polyak) {
            return Err(Error::Config("gamma must be in [0,1) and polyak in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.random_eps) || self.noise_sigma < 0.0 {
            return Err(Error::Config("bad exploration settings".into()));
        }
        Ok(())
    }

    /// Critic targets are clipped to this range (returns of {-1, 0} rewards).
    pub fn q_range(&self) -> (f64, f64) {
        (-1.0 / (1.0 - self.gamma), 0.0)
    }
}

/// Networks and input statistics of one goal-conditioned policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub task: TaskKind,
    pub actor: Net,
    pub critic: Net,
    pub actor_target: Net,
    pub critic_target: Net,
    pub obs_norm: Normalizer,
    pub goal_norm: Normalizer,
    pub train_config: TrainConfig,
    pub env_config: EnvConfig,
}

impl PolicyParams {
    pub fn new(task: TaskKind, env_config: EnvConfig, train_config: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed ^ 0x5eed_a11c);
        let mut actor_sizes = vec![ACTOR_INPUT];
        actor_sizes.extend(&train_config.hidden);
        actor_sizes.push(ACTION_DIM);
        let mut critic_sizes = vec![CRITIC_INPUT];
        critic_sizes.extend(&train_config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Tanh, &mut rng);
        let critic = Mlp::new(&critic_sizes, Activation::Identity, &mut rng);
        PolicyParams {
            task,
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            obs_norm: Normalizer::new(OBSERVATION_DIM, train_config.norm_eps, train_config.norm_clip),
            goal_norm: Normalizer::new(GOAL_DIM, train_config.norm_eps, train_config.norm_clip),
            train_config,
            env_config,
        }
    }

    /// Normalized `observation ⊕ goal`, with the goal's sign chosen on the
    /// orientation's hemisphere so both inputs flip together.
    pub fn actor_input(&self, observation: &[f64; OBSERVATION_DIM], goal: &[f64; GOAL_DIM]) -> [f64; ACTOR_INPUT] {
        let mut x = [0.0; ACTOR_INPUT];
        self.obs_norm.normalize_into(observation, &mut x[..OBSERVATION_DIM]);
        self.goal_norm
            .normalize_into(&aligned_goal(observation, goal), &mut x[OBSERVATION_DIM..]);
        x
    }

    /// Deterministic actor output in `[-1, 1]^3`.
    pub fn deterministic_action(&self, observation: &Observation, goal: &UnitQuaternion) -> [f64; 3] {
        let x = self
            .actor_input(&observation.to_array(), &goal.to_array())
            .map(|v| v as f32);
        let out = self.actor.forward_one(&x);
        std::array::from_fn(|i| f64::from(out[i]).clamp(-1.0, 1.0))
    }

    /// Behaviour policy: optional gaussian noise, then an `eps` chance of a
    /// uniformly random action.
    pub fn act<R: Rng + ?Sized>(
        &self,
        observation: &Observation,
        goal: &UnitQuaternion,
        explore: bool,
        rng: &mut R,
    ) -> [f64; 3] {
        let a = self.deterministic_action(observation, goal);
        if explore {
            self.perturb(a, rng)
        } else {
            a
        }
    }

    /// Exploration applied on top of a deterministic action.
    pub fn perturb<R: Rng + ?Sized>(&self, mut a: [f64; 3], rng: &mut R) -> [f64; 3] {
        let sigma = self.train_config.noise_sigma;
        for v in &mut a {
            let n: f64 = rng.sample(StandardNormal);
            *v = (*v + sigma * n).clamp(-1.0, 1.0);
        }
        if rng.random::<f64>() < self.train_config.random_eps {
            a = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        }
        a
    }

    /// Batched deterministic actions for many (observation, goal) pairs.
    pub fn batch_actions(&self, inputs: &[[f64; ACTOR_INPUT]]) -> Array2<f64> {
        let x = Array2::from_shape_fn((inputs.len(), ACTOR_INPUT), |(i, j)| inputs[i][j] as f32);
        self.actor.forward(x.view()).mapv(f64::from)
    }

    pub fn architecture_matches(&self, other: &PolicyParams) -> bool {
        self.actor.same_shape(&other.actor) && self.critic.same_shape(&other.critic)
    }
}

/// `goal` or `-goal`, whichever has a nonnegative inner product with the
/// orientation stored in the first four observation entries.
pub fn aligned_goal(observation: &[f64; OBSERVATION_DIM], goal: &[f64; GOAL_DIM]) -> [f64; GOAL_DIM] {
    let dot: f64 = (0..GOAL_DIM).map(|i| observation[i] * goal[i]).sum();
    if dot < 0.0 {
        goal.map(|v| -v)
    } else {
        *goal
    }
}

impl GoalPolicy for PolicyParams {
    fn action(&self, observation: &Observation, goal: &UnitQuaternion) -> [f64; 3] {
        self.deterministic_action(observation, goal)
    }
}

/// Normalized training batch.
#[derive(Clone, Debug)]
pub struct Batch<T = f32> {
    /// Actor inputs at `s` (normalized observation and goal).
    pub inputs: Array2<T>,
    /// Actor inputs at `s'` with the same goal.
    pub next_inputs: Array2<T>,
    pub actions: Array2<T>,
    pub rewards: Array1<T>,
}

impl<T> Batch<T> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub fn sample_batch<R: Rng + ?Sized>(params: &PolicyParams, buffer: &ReplayBuffer, rng: &mut R) -> Result<Batch> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let n = params.train_config.batch_size;
    let mut inputs = Array2::zeros((n, ACTOR_INPUT));
    let mut next_inputs = Array2::zeros((n, ACTOR_INPUT));
    let mut actions = Array2::zeros((n, ACTION_DIM));
    let mut rewards = Array1::zeros(n);
    for i in 0..n {
        let idx = buffer.draw_index(params.train_config.her_k, rng);
        let (goal, reward) = buffer.goal_and_reward(&idx);
        let (obs, next_obs, action) = buffer.observation_arrays(&idx);
        let g = goal.to_array();
        let row = params.actor_input(obs, &g);
        inputs.row_mut(i).iter_mut().zip(row).for_each(|(x, v)| *x = v as f32);
        let row = params.actor_input(next_obs, &g);
        next_inputs
            .row_mut(i)
            .iter_mut()
            .zip(row)
            .for_each(|(x, v)| *x = v as f32);
        actions
            .row_mut(i)
            .iter_mut()
            .zip(action)
            .for_each(|(x, v)| *x = v as f32);
        rewards[i] = reward as f32;
    }
    Ok(Batch {
        inputs,
        next_inputs,
        actions,
        rewards,
    })
}

fn concat_cols<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    ndarray::concatenate(NdAxis(1), &[a.view(), b.view()]).expect("same row count")
}

/// Clipped one-step targets `r + gamma * Q'(s', pi'(s'))`.
pub fn critic_targets(params: &PolicyParams, batch: &Batch) -> Array1<f32> {
    let cfg = &params.train_config;
    let (lo, hi) = cfg.q_range();
    let (lo, hi) = (lo as f32, hi as f32);
    let next_actions = params.actor_target.forward(batch.next_inputs.view());
    let q_next = params
        .critic_target
        .forward(concat_cols(&batch.next_inputs, &next_actions).view());
    let mut y = &batch.rewards + &(q_next.column(0).to_owned() * cfg.gamma as f32);
    y.mapv_inplace(|v| v.clamp(lo, hi));
    y
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriticStats {
    pub loss: f64,
    pub mean_abs_q: f64,
}

/// Mean squared TD error and its gradient with respect to the critic.
pub fn critic_loss_and_grad<T: Scalar>(
    critic: &Mlp<T>,
    batch: &Batch<T>,
    targets: &Array1<T>,
) -> (CriticStats, Gradients<T>) {
    let n = batch.len() as f64;
    let tape = critic.forward_tape(concat_cols(&batch.inputs, &batch.actions).view());
    let q = tape.output().column(0).to_owned();
    let err = &q - targets;
    let loss = err.iter().map(|e| e.as_f64().powi(2)).sum::<f64>() / n;
    let grad_out = (err * T::of_f64(2.0 / n)).insert_axis(NdAxis(1));
    let grads = critic.param_gradients(&tape, grad_out);
    let mean_abs_q = q.iter().map(|v| v.as_f64().abs()).sum::<f64>() / n;
    (CriticStats { loss, mean_abs_q }, grads)
}

/// `-mean Q(s, pi(s)) + action_l2 * mean(pi(s)^2)` and its gradient with respect to the actor.
pub fn actor_loss_and_grad<T: Scalar>(
    actor: &Mlp<T>,
    critic: &Mlp<T>,
    batch: &Batch<T>,
    action_l2: f64,
) -> (f64, Gradients<T>) {
    let n = batch.len() as f64;
    let actor_tape = actor.forward_tape(batch.inputs.view());
    let pi = actor_tape.output().clone();
    let critic_tape = critic.forward_tape(concat_cols(&batch.inputs, &pi).view());
    let q_sum: f64 = critic_tape.output().iter().map(|v| v.as_f64()).sum();
    let penalty_scale = action_l2 / (n * ACTION_DIM as f64);
    let loss = -q_sum / n + penalty_scale * pi.iter().map(|v| v.as_f64().powi(2)).sum::<f64>();
    let grad_q = Array2::from_elem((batch.len(), 1), T::of_f64(-1.0 / n));
    let grad_in = critic.input_gradient(&critic_tape, grad_q);
    let grad_pi = grad_in.slice(s![.., ACTOR_INPUT..]).to_owned() + &(pi * T::of_f64(2.0 * penalty_scale));
    let grads = actor.param_gradients(&actor_tape, grad_pi);
    (loss, grads)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CycleDiagnostics {
    pub mean_critic_loss: f64,
    pub mean_abs_q: f64,
    pub updates: usize,
    /// True when the buffer held fewer than `batch_size` transitions.
    pub skipped: bool,
}

/// Policy parameters plus optimizer state and the training random stream.
#[derive(Clone, Debug)]
pub struct Learner {
    pub params: PolicyParams,
    actor_opt: Adam<f32>,
    critic_opt: Adam<f32>,
    rng: ChaCha8Rng,
}

impl Learner {
    pub fn new(params: PolicyParams) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(params.train_config.seed ^ 0x7a11_b0a7);
        Learner {
            actor_opt: Adam::new(&params.actor, params.train_config.actor_lr),
            critic_opt: Adam::new(&params.critic, params.train_config.critic_lr),
            params,
            rng,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One critic step and one actor step on `batch`.
    pub fn update_on(&mut self, batch: &Batch) -> CriticStats {
        let targets = critic_targets(&self.params, batch);
        let (stats, grads) = critic_loss_and_grad(&self.params.critic, batch, &targets);
        self.critic_opt.apply(&mut self.params.critic, &grads);
        let (_, grads) = actor_loss_and_grad(
            &self.params.actor,
            &self.params.critic,
            batch,
            self.params.train_config.action_l2,
        );
        self.actor_opt.apply(&mut self.params.actor, &grads);
        stats
    }

    pub fn update_targets(&mut self) {
        let tau = self.params.train_config.polyak;
        let p = &mut self.params;
        p.actor_target.polyak_from(&p.actor, tau);
        p.critic_target.polyak_from(&p.critic, tau);
    }

    /// `updates_per_cycle` gradient steps on relabeled batches, then one
    /// polyak step of the target networks.
    pub fn train_cycle(&mut self, buffer: &ReplayBuffer) -> Result<CycleDiagnostics> {
        let cfg = self.params.train_config.clone();
        if buffer.len() < cfg.batch_size {
            return Ok(CycleDiagnostics {
                skipped: true,
                ..Default::default()
            });
        }
        let mut loss = 0.0;
        let mut abs_q = 0.0;
        for _ in 0..cfg.updates_per_cycle {
            let batch = sample_batch(&self.params, buffer, &mut self.rng)?;
            let stats = self.update_on(&batch);
            loss += stats.loss;
            abs_q += stats.mean_abs_q;
        }
        self.update_targets();
        let n = cfg.updates_per_cycle.max(1) as f64;
        Ok(CycleDiagnostics {
            mean_critic_loss: loss / n,
            mean_abs_q: abs_q / n,
            updates: cfg.updates_per_cycle,
            skipped: false,
        })
    }
}
