//! Goal-conditioned controllers.

use crate::env::Observation;
use crate::rotation::UnitQuaternion;

/// Anything that maps (observation, desired orientation) to an action in `[-1, 1]^3`.
pub trait GoalPolicy {
    fn action(&self, observation: &Observation, goal: &UnitQuaternion) -> [f64; 3];
}

impl<P: GoalPolicy + ?Sized> GoalPolicy for &P {
    fn action(&self, observation: &Observation, goal: &UnitQuaternion) -> [f64; 3] {
        (**self).action(observation, goal)
    }
}

impl<P: GoalPolicy + ?Sized> GoalPolicy for Box<P> {
    fn action(&self, observation: &Observation, goal: &UnitQuaternion) -> [f64; 3] {
        (**self).action(observation, goal)
    }
}

/// PD control on the world-frame rotation vector from the current pose to the goal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptedController {
    pub kp: f64,
    pub kd: f64,
}

impl Default for ScriptedController {
    fn default() -> Self {
        ScriptedController { kp: 2.0, kd: 2.0 }
    }
}

impl GoalPolicy for ScriptedController {
    fn action(&self, observation: &Observation, goal: &UnitQuaternion) -> [f64; 3] {
        let err = (*goal * observation.orientation.inverse()).to_rotation_vector();
        std::array::from_fn(|i| (self.kp * err[i] - self.kd * observation.angular_velocity[i]).clamp(-1.0, 1.0))
    }
}

/// Uniformly random actions, for floor estimates.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: std::cell::RefCell<rand_chacha::ChaCha8Rng>,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        RandomPolicy {
            rng: std::cell::RefCell::new(rand_chacha::ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl GoalPolicy for RandomPolicy {
    fn action(&self, _: &Observation, _: &UnitQuaternion) -> [f64; 3] {
        use rand::Rng;
        let mut rng = self.rng.borrow_mut();
        std::array::from_fn(|_| rng.random_range(-1.0..=1.0))
    }
}
