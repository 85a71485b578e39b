//! Policy checkpoints as versioned JSON.
//!
//! Layout (version 1):
//!
//! ```text
//! {
//!   "format": "chainrot-policy",
//!   "version": 1,
//!   "task": "rotate-z",
//!   "actor" | "critic" | "actor_target" | "critic_target": {
//!     "sizes": [in, hidden.., out],
//!     "output": "tanh" | "identity" | "relu",
//!     "layers": [{ "weight": [row-major, in x out], "bias": [out] }, ..]
//!   },
//!   "obs_norm" | "goal_norm": { sums, squared sums, count, eps, clip, mean, std },
//!   "train_config": { .. },
//!   "env_config": { .. }
//! }
//! ```
//!
//! Network weights are single precision, widened losslessly to the JSON
//! numbers. Floats are written with shortest round-trip formatting, so
//! loading a saved checkpoint reproduces every weight bit for bit.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::ddpg::{Net, PolicyParams, TrainConfig, ACTOR_INPUT, CRITIC_INPUT};
use super::nn::{Activation, Dense, Mlp};
use super::normalizer::Normalizer;
use crate::env::{EnvConfig, TaskKind, ACTION_DIM, GOAL_DIM, OBSERVATION_DIM};
use crate::error::{Error, Result};

pub const FORMAT: &str = "chainrot-policy";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    sizes: Vec<usize>,
    output: Activation,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    task: TaskKind,
    actor: NetworkFile,
    critic: NetworkFile,
    actor_target: NetworkFile,
    critic_target: NetworkFile,
    obs_norm: Normalizer,
    goal_norm: Normalizer,
    train_config: TrainConfig,
    env_config: EnvConfig,
}

impl NetworkFile {
    fn from_mlp(net: &Net) -> Self {
        NetworkFile {
            sizes: net.sizes(),
            output: net.output,
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    weight: l.weight.iter().map(|&v| f64::from(v)).collect(),
                    bias: l.bias.iter().map(|&v| f64::from(v)).collect(),
                })
                .collect(),
        }
    }

    fn into_mlp(self, name: &str) -> Result<Net> {
        if self.sizes.len() != self.layers.len() + 1 || self.layers.is_empty() {
            return Err(Error::Load(format!(
                "{name}: {} sizes for {} layers",
                self.sizes.len(),
                self.layers.len()
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .zip(self.sizes.windows(2))
            .enumerate()
            .map(|(k, (layer, io))| {
                let narrow = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect::<Vec<f32>>();
                let weight = Array2::from_shape_vec((io[0], io[1]), narrow(layer.weight))
                    .map_err(|_| Error::Load(format!("{name}: layer {k} weight is not {}x{}", io[0], io[1])))?;
                if layer.bias.len() != io[1] {
                    return Err(Error::Load(format!("{name}: layer {k} bias is not {}", io[1])));
                }
                Ok(Dense {
                    weight,
                    bias: Array1::from(narrow(layer.bias)),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Mlp {
            layers,
            output: self.output,
        })
    }
}

fn check_shape(name: &str, net: &Net, inputs: usize, outputs: usize) -> Result<()> {
    let sizes = net.sizes();
    if sizes[0] != inputs || sizes[sizes.len() - 1] != outputs {
        return Err(Error::Load(format!(
            "{name}: expected {inputs} inputs and {outputs} outputs, found {sizes:?}"
        )));
    }
    Ok(())
}

pub fn to_json(params: &PolicyParams) -> Result<String> {
    let file = CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        task: params.task,
        actor: NetworkFile::from_mlp(&params.actor),
        critic: NetworkFile::from_mlp(&params.critic),
        actor_target: NetworkFile::from_mlp(&params.actor_target),
        critic_target: NetworkFile::from_mlp(&params.critic_target),
        obs_norm: params.obs_norm.clone(),
        goal_norm: params.goal_norm.clone(),
        train_config: params.train_config.clone(),
        env_config: params.env_config.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn from_json(text: &str) -> Result<PolicyParams> {
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| Error::Load(format!("malformed checkpoint: {e}")))?;
    if file.format != FORMAT {
        return Err(Error::Load(format!("not a policy checkpoint ({:?})", file.format)));
    }
    if file.version != VERSION {
        return Err(Error::Load(format!("unsupported checkpoint version {}", file.version)));
    }
    let actor = file.actor.into_mlp("actor")?;
    let critic = file.critic.into_mlp("critic")?;
    let actor_target = file.actor_target.into_mlp("actor_target")?;
    let critic_target = file.critic_target.into_mlp("critic_target")?;
    check_shape("actor", &actor, ACTOR_INPUT, ACTION_DIM)?;
    check_shape("critic", &critic, CRITIC_INPUT, 1)?;
    if !actor.same_shape(&actor_target) || !critic.same_shape(&critic_target) {
        return Err(Error::Load("target networks differ from main networks".into()));
    }
    if file.obs_norm.dim() != OBSERVATION_DIM || file.goal_norm.dim() != GOAL_DIM {
        return Err(Error::Load(
            "normalizer dimensions do not match the observation layout".into(),
        ));
    }
    Ok(PolicyParams {
        task: file.task,
        actor,
        critic,
        actor_target,
        critic_target,
        obs_norm: file.obs_norm,
        goal_norm: file.goal_norm,
        train_config: file.train_config,
        env_config: file.env_config,
    })
}

pub fn save(params: &PolicyParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(params)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    from_json(&text)
}
