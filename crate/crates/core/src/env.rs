//! Goal-conditioned cube-rotation tasks on a surrogate rigid-body plant.
//!
//! The plant is a damped rotor driven by per-axis angular-acceleration
//! commands about the fixed world axes. Poses with no face lying flat
//! (face normal within [`FLAT_TOLERANCE`] of world ±z) pick up an extra
//! random drift in angular velocity, so tilted poses are harder to hold than
//! flat ones. Larger gain on z makes z turns the easiest.
//!
//! Goals are orientations: every task draws a rotation and applies it to the
//! initial pose, so `desired = offset * initial`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{fmt_vec3, KeyValues};
use crate::error::{Error, Result};
use crate::rotation::{is_success, quat_distance, Axis, UnitQuaternion, DEFAULT_TOLERANCE};

/// A face counts as lying flat when its normal is within this of world ±z.
pub const FLAT_TOLERANCE: f64 = 0.2;

/// Angles allowed about x and y in the parallel task.
pub const PARALLEL_ANGLES: [f64; 5] = [-PI, -FRAC_PI_2, 0.0, FRAC_PI_2, PI];

pub const OBSERVATION_DIM: usize = 10;
pub const GOAL_DIM: usize = 4;
pub const ACTION_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TaskKind {
    RotateZ,
    RotateX,
    RotateY,
    RotateParallel,
    RotateXYZ,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::RotateZ,
        TaskKind::RotateX,
        TaskKind::RotateY,
        TaskKind::RotateParallel,
        TaskKind::RotateXYZ,
    ];

    /// The single axis a primitive task rotates about.
    pub fn primitive_axis(self) -> Option<Axis> {
        match self {
            TaskKind::RotateZ => Some(Axis::Z),
            TaskKind::RotateX => Some(Axis::X),
            TaskKind::RotateY => Some(Axis::Y),
            _ => None,
        }
    }

    pub fn for_axis(axis: Axis) -> TaskKind {
        match axis {
            Axis::X => TaskKind::RotateX,
            Axis::Y => TaskKind::RotateY,
            Axis::Z => TaskKind::RotateZ,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::RotateZ => "rotate-z",
            TaskKind::RotateX => "rotate-x",
            TaskKind::RotateY => "rotate-y",
            TaskKind::RotateParallel => "rotate-parallel",
            TaskKind::RotateXYZ => "rotate-xyz",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown task '{s}'")))
    }
}

impl TryFrom<String> for TaskKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TaskKind> for String {
    fn from(t: TaskKind) -> Self {
        t.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub episode_length: usize,
    /// Seconds per step.
    pub dt: f64,
    /// Angular acceleration per unit action, rad/s², per world axis.
    pub gain: [f64; 3],
    /// Velocity damping, 1/s.
    pub damping: f64,
    /// Std of additive acceleration noise, rad/s², per axis.
    pub control_noise: [f64; 3],
    /// Std of the velocity random walk applied on tilted poses, rad/s per sqrt(s).
    pub tilt_drift: f64,
    /// Per-component angular speed limit, rad/s.
    pub omega_max: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            episode_length: 100,
            dt: 0.05,
            gain: [1.0, 1.0, 2.0],
            damping: 0.5,
            control_noise: [0.05; 3],
            tilt_drift: 0.1,
            omega_max: 2.0,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub const KEYS: [&'static str; 9] = [
        "episode_length",
        "dt",
        "gain",
        "damping",
        "control_noise",
        "tilt_drift",
        "omega_max",
        "tolerance",
        "seed",
    ];

    /// Deterministic plant: no control noise and no tilt drift.
    pub fn noiseless(mut self) -> Self {
        self.control_noise = [0.0; 3];
        self.tilt_drift = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.dt, self.damping, self.omega_max, self.tolerance]
            .into_iter()
            .chain(self.gain)
            .all(|v| v.is_finite() && v > 0.0);
        let nonneg = self
            .control_noise
            .into_iter()
            .chain([self.tilt_drift])
            .all(|v| v.is_finite() && v >= 0.0);
        if self.episode_length == 0 || !positive || !nonneg {
            return Err(Error::Config(format!("invalid env config {self:?}")));
        }
        if self.damping * self.dt >= 1.0 {
            return Err(Error::Config("damping * dt must be below 1".into()));
        }
        Ok(())
    }

    /// Overrides fields present in `kv`; other keys are ignored.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        if let Some(v) = kv.get("episode_length")? {
            self.episode_length = v;
        }
        if let Some(v) = kv.get("dt")? {
            self.dt = v;
        }
        if let Some(v) = kv.get_vec3("gain")? {
            self.gain = v;
        }
        if let Some(v) = kv.get("damping")? {
            self.damping = v;
        }
        if let Some(v) = kv.get_vec3("control_noise")? {
            self.control_noise = v;
        }
        if let Some(v) = kv.get("tilt_drift")? {
            self.tilt_drift = v;
        }
        if let Some(v) = kv.get("omega_max")? {
            self.omega_max = v;
        }
        if let Some(v) = kv.get("tolerance")? {
            self.tolerance = v;
        }
        if let Some(v) = kv.get("seed")? {
            self.seed = v;
        }
        self.validate()
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let unknown = kv.unknown_keys(&Self::KEYS);
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown env keys {unknown:?}")));
        }
        let mut c = EnvConfig::default();
        c.apply(kv)?;
        Ok(c)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("episode_length", self.episode_length);
        kv.set("dt", self.dt);
        kv.set("gain", fmt_vec3(self.gain));
        kv.set("damping", self.damping);
        kv.set("control_noise", fmt_vec3(self.control_noise));
        kv.set("tilt_drift", self.tilt_drift);
        kv.set("omega_max", self.omega_max);
        kv.set("tolerance", self.tolerance);
        kv.set("seed", self.seed);
        kv
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub desired: UnitQuaternion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub orientation: UnitQuaternion,
    pub angular_velocity: [f64; 3],
    pub previous_action: [f64; 3],
}

impl Observation {
    /// `[w, x, y, z, wx, wy, wz, a0, a1, a2]`
    pub fn to_array(&self) -> [f64; OBSERVATION_DIM] {
        let q = self.orientation.to_array();
        let w = self.angular_velocity;
        let a = self.previous_action;
        [q[0], q[1], q[2], q[3], w[0], w[1], w[2], a[0], a[1], a[2]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub orientation: UnitQuaternion,
    pub angular_velocity: [f64; 3],
    pub previous_action: [f64; 3],
    pub step_count: usize,
    pub rng: ChaCha8Rng,
}

impl EnvState {
    /// A resting cube at `orientation` with its own noise stream.
    pub fn at_rest(orientation: UnitQuaternion, seed: u64) -> Self {
        EnvState {
            orientation,
            angular_velocity: [0.0; 3],
            previous_action: [0.0; 3],
            step_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn observation(&self) -> Observation {
        Observation {
            orientation: self.orientation,
            angular_velocity: self.angular_velocity,
            previous_action: self.previous_action,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub is_success: bool,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub info: StepInfo,
}

/// Draws the rotation a task asks for, relative to the initial pose.
pub fn sample_goal<R: Rng + ?Sized>(task: TaskKind, rng: &mut R) -> GoalSpec {
    let uniform_angle = |rng: &mut R| -> f64 { PI - rng.random::<f64>() * 2.0 * PI };
    let desired = match task {
        TaskKind::RotateZ | TaskKind::RotateX | TaskKind::RotateY => {
            let axis = task.primitive_axis().expect("primitive task");
            UnitQuaternion::axis_angle(axis, uniform_angle(rng))
        }
        TaskKind::RotateParallel => {
            let z = uniform_angle(rng);
            let x = PARALLEL_ANGLES[rng.random_range(0..PARALLEL_ANGLES.len())];
            let y = PARALLEL_ANGLES[rng.random_range(0..PARALLEL_ANGLES.len())];
            UnitQuaternion::axis_angle(Axis::Z, z)
                * UnitQuaternion::axis_angle(Axis::X, x)
                * UnitQuaternion::axis_angle(Axis::Y, y)
        }
        TaskKind::RotateXYZ => UnitQuaternion::random(rng),
    };
    GoalSpec { desired }
}

/// The 6 orientations that put one face down on the palm, unspun.
fn face_down_pose(face: usize) -> UnitQuaternion {
    match face {
        0 => UnitQuaternion::IDENTITY,
        1 => UnitQuaternion::axis_angle(Axis::X, PI),
        2 => UnitQuaternion::axis_angle(Axis::X, FRAC_PI_2),
        3 => UnitQuaternion::axis_angle(Axis::X, -FRAC_PI_2),
        4 => UnitQuaternion::axis_angle(Axis::Y, FRAC_PI_2),
        _ => UnitQuaternion::axis_angle(Axis::Y, -FRAC_PI_2),
    }
}

/// Initial orientation: flat with a random spin for z-turns, uniform otherwise.
pub fn sample_initial<R: Rng + ?Sized>(task: TaskKind, rng: &mut R) -> UnitQuaternion {
    match task {
        TaskKind::RotateZ => {
            let face = face_down_pose(rng.random_range(0..6));
            let spin = PI - rng.random::<f64>() * 2.0 * PI;
            UnitQuaternion::axis_angle(Axis::Z, spin) * face
        }
        _ => UnitQuaternion::random(rng),
    }
}

pub fn reset(task: TaskKind, config: &EnvConfig, seed: u64) -> (EnvState, Observation, GoalSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = sample_initial(task, &mut rng);
    let offset = sample_goal(task, &mut rng);
    let goal = GoalSpec {
        desired: offset.desired * initial,
    };
    let noise_seed = rng.random();
    let state = EnvState::at_rest(initial, noise_seed);
    let obs = state.observation();
    debug_assert!(config.validate().is_ok());
    (state, obs, goal)
}

/// Smallest angle between a cube face normal and world ±z.
pub fn flat_angle(orientation: &UnitQuaternion) -> f64 {
    let m = orientation.to_matrix();
    let best = m[2].iter().map(|c| c.abs()).fold(0.0, f64::max);
    best.clamp(-1.0, 1.0).acos()
}

pub fn is_flat(orientation: &UnitQuaternion) -> bool {
    flat_angle(orientation) <= FLAT_TOLERANCE
}

pub fn compute_reward(achieved: &UnitQuaternion, desired: &UnitQuaternion, tolerance: f64) -> f64 {
    if is_success(achieved, desired, tolerance) {
        0.0
    } else {
        -1.0
    }
}

pub fn step(state: &mut EnvState, action: [f64; 3], goal: &GoalSpec, config: &EnvConfig) -> Result<StepOutcome> {
    if state.step_count >= config.episode_length {
        return Err(Error::EpisodeExhausted(state.step_count));
    }
    let action = action.map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) });
    let drift_on = !is_flat(&state.orientation);
    let drift_scale = config.tilt_drift * config.dt.sqrt();
    let decay = 1.0 - config.damping * config.dt;
    let mut omega = [0.0; 3];
    for i in 0..3 {
        let n_ctrl: f64 = state.rng.sample(StandardNormal);
        let n_tilt: f64 = state.rng.sample(StandardNormal);
        let accel = config.gain[i] * action[i] + config.control_noise[i] * n_ctrl;
        let mut w = decay * state.angular_velocity[i] + config.dt * accel;
        if drift_on {
            w += drift_scale * n_tilt;
        }
        omega[i] = w.clamp(-config.omega_max, config.omega_max);
    }
    let turn = UnitQuaternion::from_rotation_vector(omega.map(|w| w * config.dt));
    state.orientation = turn * state.orientation;
    state.angular_velocity = omega;
    state.previous_action = action;
    state.step_count += 1;

    let distance = quat_distance(&state.orientation, &goal.desired);
    let success = crate::rotation::within_tolerance(distance, config.tolerance);
    Ok(StepOutcome {
        observation: state.observation(),
        reward: if success { 0.0 } else { -1.0 },
        info: StepInfo {
            is_success: success,
            distance,
        },
    })
}

/// Owned task instance: config, state and goal together.
#[derive(Clone, Debug)]
pub struct CubeEnv {
    pub task: TaskKind,
    pub config: EnvConfig,
    pub state: EnvState,
    pub goal: GoalSpec,
}

impl CubeEnv {
    pub fn new(task: TaskKind, config: EnvConfig, seed: u64) -> Self {
        let (state, _, goal) = reset(task, &config, seed);
        CubeEnv {
            task,
            config,
            state,
            goal,
        }
    }

    /// Starts at rest at `initial` with an externally chosen goal.
    pub fn positioned(
        task: TaskKind,
        config: EnvConfig,
        initial: UnitQuaternion,
        goal: UnitQuaternion,
        seed: u64,
    ) -> Self {
        CubeEnv {
            task,
            config,
            state: EnvState::at_rest(initial, seed),
            goal: GoalSpec { desired: goal },
        }
    }

    pub fn reset(&mut self, seed: u64) -> Observation {
        let (state, obs, goal) = reset(self.task, &self.config, seed);
        self.state = state;
        self.goal = goal;
        obs
    }

    pub fn observation(&self) -> Observation {
        self.state.observation()
    }

    pub fn step(&mut self, action: [f64; 3]) -> Result<StepOutcome> {
        step(&mut self.state, action, &self.goal, &self.config)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub orientation: UnitQuaternion,
    pub action: [f64; 3],
    pub reward: f64,
}

/// One comma-separated line per record: `step,w,x,y,z,a0,a1,a2,reward`.
pub fn write_trajectory<W: Write>(mut out: W, records: &[TrajectoryRecord]) -> Result<()> {
    writeln!(out, "step,w,x,y,z,a0,a1,a2,reward")?;
    for r in records {
        let q = r.orientation.to_array();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step, q[0], q[1], q[2], q[3], r.action[0], r.action[1], r.action[2], r.reward
        )?;
    }
    Ok(())
}

pub fn save_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trajectory(f, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{decompose, Chain};

    fn cfg() -> EnvConfig {
        EnvConfig::default()
    }

    #[test]
    fn reset_is_deterministic() {
        for task in TaskKind::ALL {
            let a = reset(task, &cfg(), 11);
            let b = reset(task, &cfg(), 11);
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
            assert_eq!(a.2, b.2);
            assert_eq!(a.0.step_count, 0);
            assert_eq!(a.1.previous_action, [0.0; 3]);
        }
    }

    #[test]
    fn rotate_z_starts_flat_and_goal_is_pure_z() {
        for seed in 0..200 {
            let (state, _, goal) = reset(TaskKind::RotateZ, &cfg(), seed);
            let m = state.orientation.to_matrix();
            let best = m[2].iter().map(|c| c.abs()).fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-9);
            let rel = goal.desired * state.orientation.inverse();
            let d = decompose(&rel, Chain::ZXZ);
            assert!(d.beta().abs() < 1e-9 && d.gamma() == 0.0);
        }
    }

    #[test]
    fn zero_action_noiseless_is_fixed_point() {
        let c = cfg().noiseless();
        let (mut s, _, g) = reset(TaskKind::RotateXYZ, &c, 3);
        let q0 = s.orientation;
        for _ in 0..100 {
            step(&mut s, [0.0; 3], &g, &c).unwrap();
        }
        assert_eq!(s.orientation, q0);
    }

    #[test]
    fn reward_at_goal() {
        let c = cfg();
        let init = UnitQuaternion::axis_angle(Axis::Z, 0.3);
        let goal = GoalSpec {
            desired: UnitQuaternion::axis_angle(Axis::Z, 0.3 + 0.05),
        };
        let mut s = EnvState::at_rest(init, 1);
        let out = step(&mut s, [0.0; 3], &goal, &c.noiseless()).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(out.info.is_success);
    }

    #[test]
    fn pure_z_spin_keeps_middle_angle_zero() {
        let c = cfg().noiseless();
        let (mut s, _, g) = reset(TaskKind::RotateZ, &c, 5);
        let q0 = s.orientation;
        let mut total = 0.0;
        let mut w = 0.0f64;
        for _ in 0..100 {
            step(&mut s, [0.0, 0.0, 1.0], &g, &c).unwrap();
            // closed form of the z velocity recursion
            w = ((1.0 - c.damping * c.dt) * w + c.dt * c.gain[2]).min(c.omega_max);
            total += w * c.dt;
            let d = decompose(&(s.orientation * q0.inverse()), Chain::ZXZ);
            assert!(d.beta().abs() < 1e-9);
        }
        let expected = UnitQuaternion::axis_angle(Axis::Z, total) * q0;
        assert!(crate::rotation::geodesic_distance(&expected, &s.orientation) < 1e-9);
    }

    #[test]
    fn step_past_end_errors() {
        let c = EnvConfig {
            episode_length: 2,
            ..cfg()
        };
        let (mut s, _, g) = reset(TaskKind::RotateX, &c, 0);
        step(&mut s, [0.0; 3], &g, &c).unwrap();
        step(&mut s, [0.0; 3], &g, &c).unwrap();
        assert!(matches!(
            step(&mut s, [0.0; 3], &g, &c),
            Err(Error::EpisodeExhausted(2))
        ));
    }

    #[test]
    fn reward_matches_metric_and_norm_is_kept() {
        let c = EnvConfig {
            episode_length: 10_000,
            ..cfg()
        };
        let (mut s, _, g) = reset(TaskKind::RotateXYZ, &c, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let out = step(&mut s, a, &g, &c).unwrap();
            assert_eq!(out.reward, compute_reward(&s.orientation, &g.desired, c.tolerance));
            assert!(s.angular_velocity.iter().all(|w| w.abs() <= c.omega_max));
        }
        assert!((s.orientation.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn compute_reward_examples() {
        let q = UnitQuaternion::axis_angle(Axis::Y, 0.4);
        assert_eq!(compute_reward(&q, &q, 0.1), 0.0);
        let near = UnitQuaternion::axis_angle(Axis::Y, 0.4 + 0.099);
        assert_eq!(compute_reward(&near, &q, 0.1), 0.0);
        let far = UnitQuaternion::axis_angle(Axis::Y, 0.4 + PI);
        assert_eq!(compute_reward(&far, &q, 0.1), -1.0);
    }

    #[test]
    fn parallel_goals_use_quantized_tilts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let g = sample_goal(TaskKind::RotateParallel, &mut rng);
            // Recover the x/y angles by peeling off z: g = Rz(a) Rx(b) Ry(c).
            let found = PARALLEL_ANGLES.iter().any(|&x| {
                PARALLEL_ANGLES.iter().any(|&y| {
                    let xy = UnitQuaternion::axis_angle(Axis::X, x) * UnitQuaternion::axis_angle(Axis::Y, y);
                    let z_only = g.desired * xy.inverse();
                    let d = decompose(&z_only, Chain::ZXZ);
                    d.beta().abs() < 1e-12
                })
            });
            assert!(found);
        }
    }

    #[test]
    fn trajectory_lines() {
        let rec = [TrajectoryRecord {
            step: 0,
            orientation: UnitQuaternion::IDENTITY,
            action: [0.5, 0.0, -1.0],
            reward: -1.0,
        }];
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &rec).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("0,1,0,0,0,0.5,0,-1,-1"));
    }

    #[test]
    fn config_key_values_round_trip() {
        let c = EnvConfig {
            gain: [1.5, 1.0, 3.0],
            seed: 42,
            ..cfg()
        };
        let back = EnvConfig::from_key_values(&c.to_key_values()).unwrap();
        assert_eq!(back, c);
        let bad = KeyValues::parse("gains = 1\n").unwrap();
        assert!(EnvConfig::from_key_values(&bad).is_err());
        let bad = KeyValues::parse("dt = -1\n").unwrap();
        assert!(EnvConfig::from_key_values(&bad).is_err());
    }

    #[test]
    fn task_names_parse() {
        for t in TaskKind::ALL {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
        }
        assert!("rotate-w".parse::<TaskKind>().is_err());
    }

    fn final_success_rate(task: TaskKind, episodes: u64) -> f64 {
        use crate::policy::{GoalPolicy, ScriptedController};
        let c = cfg();
        let ctrl = ScriptedController::default();
        let mut wins = 0;
        for seed in 0..episodes {
            let mut env = CubeEnv::new(task, c.clone(), 1000 + seed);
            let mut last = None;
            for _ in 0..c.episode_length {
                let a = ctrl.action(&env.observation(), &env.goal.desired);
                last = Some(env.step(a).unwrap());
            }
            wins += last.unwrap().info.is_success as usize;
        }
        wins as f64 / episodes as f64
    }

    #[test]
    fn z_turns_are_easier_than_x_turns() {
        let z = final_success_rate(TaskKind::RotateZ, 500);
        let x = final_success_rate(TaskKind::RotateX, 500);
        // one-sided two-proportion z test at 95%
        let p = (z + x) / 2.0;
        let se = (2.0 * p * (1.0 - p) / 500.0).sqrt().max(1e-12);
        assert!((z - x) / se > 1.645, "z {z} x {x}");
    }

    #[test]
    fn xyz_goals_are_uniform_rotations() {
        // Oracle: normalize 4-vectors drawn uniformly from the unit ball.
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut oracle = Vec::with_capacity(n);
        while oracle.len() < n {
            let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let r2: f64 = v.iter().map(|c| c * c).sum();
            if r2 > 1e-6 && r2 <= 1.0 {
                let q = UnitQuaternion::new(v[0], v[1], v[2], v[3]).unwrap();
                oracle.push(quat_distance(&UnitQuaternion::IDENTITY, &q));
            }
        }
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                quat_distance(
                    &UnitQuaternion::IDENTITY,
                    &sample_goal(TaskKind::RotateXYZ, &mut rng).desired,
                )
            })
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let se = ((var(&samples) + var(&oracle)) / n as f64).sqrt();
        assert!((mean(&samples) - mean(&oracle)).abs() < 3.0 * se);
        // closed form for a uniform rotation: pi/2 + 2/pi
        let exact = PI / 2.0 + 2.0 / PI;
        assert!((mean(&samples) - exact).abs() < 3.0 * (var(&samples) / n as f64).sqrt());
    }
}
