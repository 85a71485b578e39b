//! Hierarchical cube-rotation control.
//!
//! Arbitrary 3D rotation goals are split into three rotations about fixed
//! world axes (a proper-Euler chain such as z-x-z). Each single-axis rotation
//! is handled by a goal-conditioned primitive policy trained with
//! deterministic policy gradients and hindsight goal relabeling on a sparse
//! reward. The [`bench`] module builds the stratified test set and compares
//! the chained primitives against a policy trained end to end.

pub mod bench;
pub mod config;
pub mod env;
pub mod error;
pub mod hier;
pub mod learner;
pub mod policy;
pub mod rotation;

pub use error::{Error, Result};
