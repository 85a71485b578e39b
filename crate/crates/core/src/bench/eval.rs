//! Paired evaluation of chained primitives and an end-to-end policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use super::testset::{TestCase, TestSet};
use crate::env::{self, CubeEnv, EnvConfig, GoalSpec, TaskKind};
use crate::error::{Error, Result};
use crate::hier::{execute_both, ExecConfig, ExecTrace, PolicySet};
use crate::policy::GoalPolicy;
use crate::rotation::{quat_distance, within_tolerance, UnitQuaternion};

/// Steps granted to the end-to-end policy: three chain angles' worth.
pub const BASELINE_STEPS: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub success: bool,
    pub distance: f64,
    pub steps: usize,
}

impl MethodOutcome {
    fn from_trace(t: &ExecTrace) -> Self {
        MethodOutcome {
            success: t.success,
            distance: t.final_distance,
            steps: t.total_steps,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub id: usize,
    pub required_rotations: usize,
    pub parallel_comparable: bool,
    pub zxz: MethodOutcome,
    pub zyz: MethodOutcome,
    pub best: MethodOutcome,
    pub baseline: Option<MethodOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub env_config: EnvConfig,
    pub exec: ExecConfig,
    pub baseline_steps: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            env_config: EnvConfig::default(),
            exec: ExecConfig::default(),
            baseline_steps: BASELINE_STEPS,
            seed: 0,
        }
    }
}

/// Noise seed shared by every method on one case.
pub fn case_seed(seed: u64, id: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng.random()
}

fn case_env(case: &TestCase, options: &EvalOptions) -> CubeEnv {
    CubeEnv::positioned(
        TaskKind::RotateXYZ,
        options.env_config.clone(),
        case.initial,
        case.goal,
        case_seed(options.seed, case.id),
    )
}

/// Runs `policy` on the 3D goal for exactly `steps` env steps.
pub fn run_direct<P: GoalPolicy>(
    env: &mut CubeEnv,
    policy: &P,
    goal: UnitQuaternion,
    steps: usize,
) -> Result<MethodOutcome> {
    let spec = GoalSpec { desired: goal };
    let mut config = env.config.clone();
    config.episode_length = env.state.step_count + steps;
    for _ in 0..steps {
        let action = policy.action(&env.state.observation(), &goal);
        env::step(&mut env.state, action, &spec, &config)?;
    }
    let distance = quat_distance(&env.state.orientation, &goal);
    Ok(MethodOutcome {
        success: within_tolerance(distance, config.tolerance),
        distance,
        steps,
    })
}

/// Outcome of every method on one case, plus both chain traces.
pub fn evaluate_case<P: GoalPolicy, B: GoalPolicy>(
    case: &TestCase,
    policies: &PolicySet<P>,
    baseline: Option<&B>,
    options: &EvalOptions,
) -> Result<(CaseOutcome, [ExecTrace; 2])> {
    let env = case_env(case, options);
    let both = execute_both(&env, policies, case.goal, &options.exec)?;
    let baseline = match baseline {
        Some(b) => Some(run_direct(&mut env.clone(), b, case.goal, options.baseline_steps)?),
        None => None,
    };
    let outcome = CaseOutcome {
        id: case.id,
        required_rotations: case.required_rotations,
        parallel_comparable: case.parallel_comparable,
        zxz: MethodOutcome::from_trace(&both.zxz),
        zyz: MethodOutcome::from_trace(&both.zyz),
        best: MethodOutcome::from_trace(both.best()),
        baseline,
    };
    Ok((outcome, [both.zxz, both.zyz]))
}

/// Evaluates every case; traces are appended to `traces` when given.
pub fn evaluate_cases<P: GoalPolicy, B: GoalPolicy>(
    testset: &TestSet,
    policies: &PolicySet<P>,
    baseline: Option<&B>,
    options: &EvalOptions,
    mut traces: Option<&mut Vec<ExecTrace>>,
) -> Result<Vec<CaseOutcome>> {
    options.exec.validate()?;
    if options.baseline_steps == 0 {
        return Err(Error::Config("baseline_steps must be positive".into()));
    }
    testset
        .cases
        .iter()
        .map(|case| {
            let (outcome, pair) = evaluate_case(case, policies, baseline, options)?;
            if let Some(t) = traces.as_deref_mut() {
                t.extend(pair);
            }
            Ok(outcome)
        })
        .collect()
}

pub fn evaluate<P: GoalPolicy, B: GoalPolicy>(
    testset: &TestSet,
    policies: &PolicySet<P>,
    baseline: Option<&B>,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let outcomes = evaluate_cases(testset, policies, baseline, options, None)?;
    Ok(EvalReport::from_outcomes(&outcomes))
}
