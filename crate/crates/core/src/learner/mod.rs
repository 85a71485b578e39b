//! Goal-conditioned actor-critic training with hindsight relabeling.

pub mod checkpoint;
pub mod ddpg;
pub mod nn;
pub mod normalizer;
pub mod replay;
pub mod train;

pub use ddpg::{CycleDiagnostics, Learner, PolicyParams, TrainConfig};
pub use replay::{Episode, ReplayBuffer, Transition};
pub use train::{train, CurvePoint, EvalSet, Preset, TrainOutcome};
