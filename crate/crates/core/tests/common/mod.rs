#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use chainrot::env::{compute_reward, Observation};
use chainrot::learner::nn::{Gradients, Mlp};
use chainrot::learner::{Episode, Transition};
use chainrot::rotation::{Axis, UnitQuaternion};

/// Episode whose cube turns about a random axis by a fixed increment per step.
pub fn synthetic_episode(id: u64, length: usize, tolerance: f64, rng: &mut ChaCha8Rng) -> Episode {
    let start = UnitQuaternion::random(rng);
    let axis = Axis::ALL[rng.random_range(0..3)];
    let inc: f64 = rng.random_range(-0.1..0.1);
    let desired = UnitQuaternion::random(rng);
    let pose = |k: usize| UnitQuaternion::from_axis_angle(axis, inc * k as f64).unwrap() * start;
    let mut omega = [0.0; 3];
    omega[axis.index()] = inc;
    let obs = |k: usize| Observation {
        orientation: pose(k),
        angular_velocity: omega,
        previous_action: [0.0; 3],
    };
    let transitions = (0..length)
        .map(|k| Transition {
            observation: obs(k),
            action: [0.0; 3],
            reward: compute_reward(&pose(k + 1), &desired, tolerance),
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

fn parameter_mut(net: &mut Mlp<f64>, mut index: usize) -> &mut f64 {
    for layer in &mut net.layers {
        if index < layer.weight.len() {
            return layer.weight.iter_mut().nth(index).unwrap();
        }
        index -= layer.weight.len();
        if index < layer.bias.len() {
            return &mut layer.bias[index];
        }
        index -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

fn flatten(grads: &Gradients<f64>) -> Vec<f64> {
    grads
        .weight
        .iter()
        .zip(&grads.bias)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
        .collect()
}

/// Norm-wise relative error between analytic and central-difference gradients
/// over every parameter of `net`.
pub fn gradient_relative_error(net: &Mlp<f64>, loss: impl Fn(&Mlp<f64>) -> f64, analytic: &Gradients<f64>) -> f64 {
    let h = 1e-6;
    let numeric: Vec<f64> = (0..net.parameter_count())
        .map(|i| {
            let mut plus = net.clone();
            *parameter_mut(&mut plus, i) += h;
            let mut minus = net.clone();
            *parameter_mut(&mut minus, i) -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect();
    let exact = flatten(analytic);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = exact.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    let scale = norm(&exact).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
