//! Rollout collection, the training loop and held-out evaluation.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ddpg::{aligned_goal, CycleDiagnostics, Learner, PolicyParams, TrainConfig, ACTOR_INPUT};
use super::replay::{Episode, ReplayBuffer, Transition};
use crate::config::KeyValues;
use crate::env::{CubeEnv, EnvConfig, TaskKind};
use crate::error::{Error, Result};
use crate::rotation::quat_distance;

/// Named training budgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Original budgets: 2M steps for z-turns, 4M for x/y, 10M for the end-to-end tasks.
    Full,
    /// Single-core budgets: a tenth of the primitive budgets, small networks.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset {s:?} (full|desk)"))),
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 19] = [
        "total_timesteps",
        "cycle_episodes",
        "updates_per_cycle",
        "batch_size",
        "gamma",
        "polyak",
        "actor_lr",
        "critic_lr",
        "her_k",
        "noise_sigma",
        "random_eps",
        "action_l2",
        "hidden",
        "buffer_capacity",
        "norm_clip",
        "norm_eps",
        "eval_goals",
        "keep_best",
        "seed",
    ];

    pub fn preset(preset: Preset, task: TaskKind) -> Self {
        match preset {
            Preset::Full => TrainConfig {
                total_timesteps: match task {
                    TaskKind::RotateZ => 2_000_000,
                    TaskKind::RotateX | TaskKind::RotateY => 4_000_000,
                    TaskKind::RotateParallel | TaskKind::RotateXYZ => 10_000_000,
                },
                ..TrainConfig::default()
            },
            Preset::Desk => TrainConfig {
                total_timesteps: match task {
                    TaskKind::RotateZ => 200_000,
                    TaskKind::RotateX | TaskKind::RotateY => 400_000,
                    TaskKind::RotateParallel | TaskKind::RotateXYZ => 1_000_000,
                },
                cycle_episodes: 2,
                updates_per_cycle: 20,
                batch_size: 128,
                action_l2: 0.1,
                hidden: vec![128, 128, 128],
                buffer_capacity: 1_000_000,
                ..TrainConfig::default()
            },
        }
    }

    /// Overrides fields present in `kv`; other keys are ignored.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        macro_rules! field {
            ($($name:ident),*) => {$(
                if let Some(v) = kv.get(stringify!($name))? {
                    self.$name = v;
                }
            )*};
        }
        field!(
            total_timesteps,
            cycle_episodes,
            updates_per_cycle,
            batch_size,
            gamma,
            polyak,
            actor_lr,
            critic_lr,
            her_k,
            noise_sigma,
            random_eps,
            action_l2,
            buffer_capacity,
            norm_clip,
            norm_eps,
            eval_goals,
            keep_best,
            seed
        );
        if let Some(text) = kv.get::<String>("hidden")? {
            self.hidden = text
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("hidden: {e}")))?;
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("total_timesteps", self.total_timesteps);
        kv.set("cycle_episodes", self.cycle_episodes);
        kv.set("updates_per_cycle", self.updates_per_cycle);
        kv.set("batch_size", self.batch_size);
        kv.set("gamma", self.gamma);
        kv.set("polyak", self.polyak);
        kv.set("actor_lr", self.actor_lr);
        kv.set("critic_lr", self.critic_lr);
        kv.set("her_k", self.her_k);
        kv.set("noise_sigma", self.noise_sigma);
        kv.set("random_eps", self.random_eps);
        kv.set("action_l2", self.action_l2);
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        kv.set("hidden", hidden.join(","));
        kv.set("buffer_capacity", self.buffer_capacity);
        kv.set("norm_clip", self.norm_clip);
        kv.set("norm_eps", self.norm_eps);
        kv.set("eval_goals", self.eval_goals);
        kv.set("keep_best", self.keep_best);
        kv.set("seed", self.seed);
        kv
    }
}

/// A training run description read from one key-value file.
///
/// `preset = desk|full` picks the base budget, unprefixed keys override
/// [`TrainConfig`] fields and `env.`-prefixed keys override [`EnvConfig`].
pub fn load_run_config(kv: &KeyValues, task: TaskKind) -> Result<(EnvConfig, TrainConfig)> {
    let preset = kv.get::<String>("preset")?.as_deref().unwrap_or("desk").parse()?;
    let mut env_kv = KeyValues::default();
    let mut train_kv = KeyValues::default();
    for key in kv.keys() {
        let value: String = kv.get(key)?.expect("key listed");
        if let Some(env_key) = key.strip_prefix("env.") {
            if !EnvConfig::KEYS.contains(&env_key) {
                return Err(Error::Config(format!("unknown env key {key:?}")));
            }
            env_kv.set(env_key, value);
        } else if key != "preset" {
            if !TrainConfig::KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown training key {key:?}")));
            }
            train_kv.set(key, value);
        }
    }
    let mut env = EnvConfig::default();
    env.apply(&env_kv)?;
    let mut train = TrainConfig::preset(preset, task);
    train.apply(&train_kv)?;
    train.validate(env.episode_length)?;
    Ok((env, train))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cycle: usize,
    pub env_steps: usize,
    pub success_rate: f64,
}

pub fn write_curve<W: Write>(mut out: W, curve: &[CurvePoint]) -> Result<()> {
    writeln!(out, "cycle,env_steps,success_rate")?;
    for p in curve {
        writeln!(out, "{},{},{}", p.cycle, p.env_steps, p.success_rate)?;
    }
    Ok(())
}

pub fn save_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_curve(std::io::BufWriter::new(file), curve)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub curve: Vec<CurvePoint>,
    pub diagnostics: Vec<CycleDiagnostics>,
    pub env_steps: usize,
    /// Cycle whose snapshot was returned.
    pub selected_cycle: usize,
}

impl TrainOutcome {
    pub fn best_success(&self) -> f64 {
        self.curve.iter().map(|p| p.success_rate).fold(0.0, f64::max)
    }
}

/// Runs `n` environments in lockstep with batched actor evaluation.
///
/// `noise` decides exploration: `None` is greedy, `Some(rng)` uses the
/// behaviour policy. Returns one episode per environment.
fn lockstep_rollouts(
    params: &PolicyParams,
    envs: &mut [CubeEnv],
    first_id: u64,
    mut noise: Option<&mut ChaCha8Rng>,
) -> Result<Vec<Episode>> {
    let length = envs.first().map_or(0, |e| e.config.episode_length);
    let mut episodes: Vec<Episode> = (0..envs.len())
        .map(|_| Episode {
            transitions: Vec::with_capacity(length),
        })
        .collect();
    let mut inputs = vec![[0.0; ACTOR_INPUT]; envs.len()];
    for t in 0..length {
        for (env, x) in envs.iter().zip(inputs.iter_mut()) {
            *x = params.actor_input(&env.observation().to_array(), &env.goal.desired.to_array());
        }
        let actions = params.batch_actions(&inputs);
        for (i, env) in envs.iter_mut().enumerate() {
            let mut a: [f64; 3] = std::array::from_fn(|j| actions[[i, j]].clamp(-1.0, 1.0));
            if let Some(rng) = noise.as_deref_mut() {
                a = params.perturb(a, rng);
            }
            let observation = env.observation();
            let achieved_goal = observation.orientation;
            let out = env.step(a)?;
            episodes[i].transitions.push(Transition {
                observation,
                action: a,
                reward: out.reward,
                next_observation: out.observation,
                achieved_goal,
                next_achieved_goal: out.observation.orientation,
                desired_goal: env.goal.desired,
                episode_id: first_id + i as u64,
                step_index: t,
            });
        }
    }
    Ok(episodes)
}

/// Fixed held-out evaluation episodes for one task.
#[derive(Clone, Debug)]
pub struct EvalSet {
    pub task: TaskKind,
    pub seeds: Vec<u64>,
}

impl EvalSet {
    pub fn new(task: TaskKind, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EvalSet {
            task,
            seeds: (0..count).map(|_| rng.random()).collect(),
        }
    }

    /// Greedy success rate and mean final distance.
    pub fn evaluate(&self, params: &PolicyParams, env_config: &EnvConfig) -> Result<(f64, f64)> {
        if self.seeds.is_empty() {
            return Ok((0.0, 0.0));
        }
        let mut envs: Vec<CubeEnv> = self
            .seeds
            .iter()
            .map(|&s| CubeEnv::new(self.task, env_config.clone(), s))
            .collect();
        lockstep_rollouts(params, &mut envs, 0, None)?;
        let n = envs.len() as f64;
        let mut successes = 0usize;
        let mut distance = 0.0;
        for env in &envs {
            let d = quat_distance(&env.state.orientation, &env.goal.desired);
            distance += d;
            successes += usize::from(crate::rotation::within_tolerance(d, env_config.tolerance));
        }
        Ok((successes as f64 / n, distance / n))
    }
}

fn update_normalizers(params: &mut PolicyParams, episodes: &[Episode]) {
    for ep in episodes {
        for tr in &ep.transitions {
            let obs = tr.observation.to_array();
            params.obs_norm.update(&obs);
            params
                .goal_norm
                .update(&aligned_goal(&obs, &tr.desired_goal.to_array()));
            params
                .goal_norm
                .update(&aligned_goal(&obs, &tr.next_achieved_goal.to_array()));
        }
    }
    params.obs_norm.refresh();
    params.goal_norm.refresh();
}

pub fn train(task: TaskKind, env_config: EnvConfig, train_config: TrainConfig) -> Result<TrainOutcome> {
    train_with(task, env_config, train_config, |_, _| {})
}

/// [`train`] with a callback after every cycle.
pub fn train_with<F>(
    task: TaskKind,
    env_config: EnvConfig,
    train_config: TrainConfig,
    mut on_cycle: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&CurvePoint, &CycleDiagnostics),
{
    env_config.validate()?;
    train_config.validate(env_config.episode_length)?;
    let length = env_config.episode_length;
    let cycle_steps = train_config.cycle_episodes * length;
    let cycles = train_config.total_timesteps / cycle_steps;

    let mut seeds = ChaCha8Rng::seed_from_u64(train_config.seed);
    let eval = EvalSet::new(task, train_config.eval_goals, seeds.random());
    let mut explore_rng = ChaCha8Rng::seed_from_u64(seeds.random());
    let mut buffer = ReplayBuffer::new(train_config.buffer_capacity, length, env_config.tolerance);
    let mut learner = Learner::new(PolicyParams::new(task, env_config.clone(), train_config.clone()));

    let mut curve = Vec::with_capacity(cycles);
    let mut diagnostics = Vec::with_capacity(cycles);
    let mut best: Option<(f64, usize, PolicyParams)> = None;
    let mut env_steps = 0;
    let mut next_id = 0u64;
    for cycle in 0..cycles {
        let mut envs: Vec<CubeEnv> = (0..train_config.cycle_episodes)
            .map(|_| CubeEnv::new(task, env_config.clone(), seeds.random()))
            .collect();
        let episodes = lockstep_rollouts(&learner.params, &mut envs, next_id, Some(&mut explore_rng))?;
        next_id += episodes.len() as u64;
        env_steps += cycle_steps;
        for ep in &episodes {
            buffer.store_episode(ep)?;
        }
        update_normalizers(&mut learner.params, &episodes);
        let diag = learner.train_cycle(&buffer)?;
        let (success_rate, _) = eval.evaluate(&learner.params, &env_config)?;
        let point = CurvePoint {
            cycle,
            env_steps,
            success_rate,
        };
        on_cycle(&point, &diag);
        curve.push(point);
        diagnostics.push(diag);
        if train_config.keep_best && best.as_ref().is_none_or(|(s, _, _)| success_rate > *s) {
            best = Some((success_rate, cycle, learner.params.clone()));
        }
    }
    let (params, selected_cycle) = match best {
        Some((_, cycle, params)) => (params, cycle),
        None => (learner.params, cycles.saturating_sub(1)),
    };
    Ok(TrainOutcome {
        params,
        curve,
        diagnostics,
        env_steps,
        selected_cycle,
    })
}
