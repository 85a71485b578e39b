//! Sequential execution of single-axis primitives along a Davenport plan.
//!
//! Subgoals are fixed when the plan is built: a primitive that stops short
//! leaves the next primitive chasing a subgoal that assumes the previous
//! rotation was perfect. The optional `replan` flag instead rebuilds the
//! remaining plan from the achieved pose after each chain angle.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{self, CubeEnv, GoalSpec};
use crate::error::{Error, Result};
use crate::learner::PolicyParams;
use crate::policy::GoalPolicy;
use crate::rotation::{is_success, plan, quat_distance, Axis, Chain, DavenportPlan, UnitQuaternion, DEFAULT_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainChoice {
    Zxz,
    Zyz,
    BestOfBoth,
}

impl ChainChoice {
    pub fn name(self) -> &'static str {
        match self {
            ChainChoice::Zxz => "zxz",
            ChainChoice::Zyz => "zyz",
            ChainChoice::BestOfBoth => "best",
        }
    }
}

impl fmt::Display for ChainChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChainChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "zxz" => Ok(ChainChoice::Zxz),
            "zyz" => Ok(ChainChoice::Zyz),
            "best" | "bestofboth" => Ok(ChainChoice::BestOfBoth),
            _ => Err(Error::InvalidInput(format!(
                "unknown chain choice {s:?} (zxz|zyz|best)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub chain: ChainChoice,
    pub split_large: bool,
    /// Env steps granted to each chain angle; split parts share it equally.
    pub per_step_budget: usize,
    pub tolerance: f64,
    /// Rebuild the remaining plan from the achieved pose after each chain angle.
    pub replan: bool,
    /// Steps left over by an early stop are added to the next step's budget.
    pub carry_over: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            chain: ChainChoice::BestOfBoth,
            split_large: true,
            per_step_budget: 100,
            tolerance: DEFAULT_TOLERANCE,
            replan: false,
            carry_over: false,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_step_budget == 0 || self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config("per_step_budget and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One primitive policy per world axis.
#[derive(Clone, Debug)]
pub struct PolicySet<P> {
    policies: BTreeMap<Axis, P>,
}

impl<P: GoalPolicy> PolicySet<P> {
    /// Requires a z policy and at least one of x or y.
    pub fn new(policies: BTreeMap<Axis, P>) -> Result<Self> {
        if !policies.contains_key(&Axis::Z) || !(policies.contains_key(&Axis::X) || policies.contains_key(&Axis::Y)) {
            return Err(Error::Config("a policy set needs z and at least one of x, y".into()));
        }
        Ok(PolicySet { policies })
    }

    /// The same policy for every axis.
    pub fn uniform(policy: P) -> Self
    where
        P: Clone,
    {
        PolicySet {
            policies: Axis::ALL.iter().map(|&a| (a, policy.clone())).collect(),
        }
    }

    pub fn get(&self, axis: Axis) -> Option<&P> {
        self.policies.get(&axis)
    }

    pub fn axes(&self) -> impl Iterator<Item = Axis> + '_ {
        self.policies.keys().copied()
    }

    pub fn covers(&self, chain: Chain) -> bool {
        chain.axes().iter().all(|a| self.policies.contains_key(a))
    }
}

impl PolicySet<PolicyParams> {
    /// Assigns each checkpoint to the axis of the primitive task it was trained on.
    pub fn from_checkpoints(checkpoints: Vec<PolicyParams>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for p in checkpoints {
            let axis = p
                .task
                .primitive_axis()
                .ok_or_else(|| Error::Config(format!("{} is not a single-axis task", p.task)))?;
            if map.insert(axis, p).is_some() {
                return Err(Error::Config(format!("two policies for axis {}", axis.letter())));
            }
        }
        PolicySet::new(map)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub axis: Axis,
    pub angle: f64,
    pub parent: usize,
    pub subgoal: UnitQuaternion,
    pub budget: usize,
    pub steps_used: usize,
    pub achieved: UnitQuaternion,
    pub step_success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecTrace {
    pub chain_used: Chain,
    pub plan: DavenportPlan,
    pub steps: Vec<StepRecord>,
    pub goal: UnitQuaternion,
    pub final_orientation: UnitQuaternion,
    pub final_distance: f64,
    pub success: bool,
    pub total_steps: usize,
}

/// Per-part budgets: a split angle shares its parent's budget, the first part
/// taking the odd step.
fn part_budgets(plan: &DavenportPlan, per_step: usize) -> Vec<usize> {
    let parts = plan.parts_per_parent();
    let mut seen = [0usize; 3];
    plan.steps
        .iter()
        .map(|s| {
            let n = parts[s.parent];
            let k = seen[s.parent];
            seen[s.parent] += 1;
            per_step / n + usize::from(k < per_step % n)
        })
        .collect()
}

/// Runs `policy` toward `subgoal` for at most `budget` steps, stopping once
/// the subgoal is within tolerance.
fn run_primitive<P: GoalPolicy>(
    env: &mut CubeEnv,
    policy: &P,
    subgoal: UnitQuaternion,
    budget: usize,
    tolerance: f64,
) -> Result<usize> {
    let goal = GoalSpec { desired: subgoal };
    let mut config = env.config.clone();
    config.episode_length = env.state.step_count + budget;
    let mut used = 0;
    while used < budget && !is_success(&env.state.orientation, &subgoal, tolerance) {
        let action = policy.action(&env.state.observation(), &subgoal);
        env::step(&mut env.state, action, &goal, &config)?;
        used += 1;
    }
    Ok(used)
}

/// Executes one chain from the env's current orientation toward `goal`.
pub fn execute_chain<P: GoalPolicy>(
    env: &mut CubeEnv,
    policies: &PolicySet<P>,
    goal: UnitQuaternion,
    chain: Chain,
    config: &ExecConfig,
) -> Result<ExecTrace> {
    config.validate()?;
    if !policies.covers(chain) {
        return Err(Error::Config(format!("no policy for some axis of chain {chain}")));
    }
    let initial = env.state.orientation;
    let the_plan = plan(&initial, &goal, chain, config.split_large);
    let mut current = the_plan.clone();
    let mut records = Vec::with_capacity(the_plan.steps.len());
    let mut bank = 0;
    let mut total = 0;
    let mut k = 0;
    while k < current.steps.len() {
        let step = current.steps[k];
        let budget = part_budgets(&current, config.per_step_budget)[k] + bank;
        let policy = policies.get(step.axis).expect("coverage checked");
        let used = run_primitive(env, policy, step.subgoal, budget, config.tolerance)?;
        total += used;
        bank = if config.carry_over { budget - used } else { 0 };
        let achieved = env.state.orientation;
        records.push(StepRecord {
            axis: step.axis,
            angle: step.angle,
            parent: step.parent,
            subgoal: step.subgoal,
            budget,
            steps_used: used,
            achieved,
            step_success: is_success(&achieved, &step.subgoal, config.tolerance),
        });
        k += 1;
        // replanning happens between chain angles so each angle keeps its budget
        if config.replan && k < current.steps.len() && current.steps[k].parent != step.parent {
            let next_parent = current.steps[k].parent;
            let fresh = plan(&achieved, &goal, chain, config.split_large);
            current.steps.truncate(k);
            current
                .steps
                .extend(fresh.steps.into_iter().filter(|s| s.parent >= next_parent));
        }
    }
    let final_orientation = env.state.orientation;
    let final_distance = quat_distance(&final_orientation, &goal);
    Ok(ExecTrace {
        chain_used: chain,
        plan: the_plan,
        steps: records,
        goal,
        final_orientation,
        final_distance,
        success: crate::rotation::within_tolerance(final_distance, config.tolerance),
        total_steps: total,
    })
}

/// Both evaluated chains run from identical copies of the env.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestOf {
    pub zxz: ExecTrace,
    pub zyz: ExecTrace,
}

impl BestOf {
    /// A successful trace, else the closer one; ties go to z-x-z.
    pub fn best(&self) -> &ExecTrace {
        pick_best(&self.zxz, &self.zyz)
    }

    pub fn best_chain(&self) -> ChainChoice {
        if std::ptr::eq(self.best(), &self.zxz) {
            ChainChoice::Zxz
        } else {
            ChainChoice::Zyz
        }
    }
}

pub fn pick_best<'a>(zxz: &'a ExecTrace, zyz: &'a ExecTrace) -> &'a ExecTrace {
    match (zxz.success, zyz.success) {
        (true, _) => zxz,
        (false, true) => zyz,
        (false, false) if zyz.final_distance < zxz.final_distance => zyz,
        _ => zxz,
    }
}

pub fn execute_both<P: GoalPolicy>(
    env: &CubeEnv,
    policies: &PolicySet<P>,
    goal: UnitQuaternion,
    config: &ExecConfig,
) -> Result<BestOf> {
    let mut a = env.clone();
    let mut b = env.clone();
    Ok(BestOf {
        zxz: execute_chain(&mut a, policies, goal, Chain::ZXZ, config)?,
        zyz: execute_chain(&mut b, policies, goal, Chain::ZYZ, config)?,
    })
}

pub fn execute_best_of<P: GoalPolicy>(
    env: &mut CubeEnv,
    policies: &PolicySet<P>,
    goal: UnitQuaternion,
    config: &ExecConfig,
) -> Result<ExecTrace> {
    let both = execute_both(env, policies, goal, config)?;
    let best = both.best().clone();
    Ok(best)
}

/// Executes according to `config.chain`.
pub fn execute<P: GoalPolicy>(
    env: &mut CubeEnv,
    policies: &PolicySet<P>,
    goal: UnitQuaternion,
    config: &ExecConfig,
) -> Result<ExecTrace> {
    match config.chain {
        ChainChoice::Zxz => execute_chain(env, policies, goal, Chain::ZXZ, config),
        ChainChoice::Zyz => execute_chain(env, policies, goal, Chain::ZYZ, config),
        ChainChoice::BestOfBoth => execute_best_of(env, policies, goal, config),
    }
}

/// One JSON object per line.
pub fn write_traces<W: Write>(mut out: W, traces: &[ExecTrace]) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_traces<R: BufRead>(input: R) -> Result<Vec<ExecTrace>> {
    let mut traces = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            traces.push(serde_json::from_str(&line)?);
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, TaskKind};
    use crate::policy::{RandomPolicy, ScriptedController};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scripted() -> PolicySet<ScriptedController> {
        PolicySet::uniform(ScriptedController { kp: 4.0, kd: 3.0 })
    }

    fn env_at(initial: UnitQuaternion, config: EnvConfig) -> CubeEnv {
        CubeEnv::positioned(TaskKind::RotateXYZ, config, initial, initial, 1)
    }

    #[test]
    fn reaching_the_start_costs_nothing() {
        let q = UnitQuaternion::from_axis_angle(Axis::Y, 0.8).unwrap();
        let mut env = env_at(q, EnvConfig::default());
        let t = execute(&mut env, &scripted(), q, &ExecConfig::default()).unwrap();
        assert!(t.success);
        assert_eq!(t.total_steps, 0);
        assert_eq!(t.steps.len(), 3);
    }

    #[test]
    fn budgets_cap_each_chain_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lazy = PolicySet::uniform(RandomPolicy::new(3));
        for split in [false, true] {
            for _ in 0..20 {
                let initial = UnitQuaternion::random(&mut rng);
                let goal = UnitQuaternion::random(&mut rng);
                let cfg = ExecConfig {
                    chain: ChainChoice::Zxz,
                    split_large: split,
                    ..ExecConfig::default()
                };
                let t = execute(&mut env_at(initial, EnvConfig::default()), &lazy, goal, &cfg).unwrap();
                assert!(t.total_steps <= 300);
                let mut per_parent = [0; 3];
                for r in &t.steps {
                    assert!(r.steps_used <= r.budget);
                    per_parent[r.parent] += r.budget;
                }
                assert_eq!(per_parent, [100; 3]);
            }
        }
    }

    #[test]
    fn split_parts_share_the_parent_budget() {
        let initial = UnitQuaternion::IDENTITY;
        let goal = UnitQuaternion::from_axis_angle(Axis::Z, 2.5).unwrap();
        let p = plan(&initial, &goal, Chain::ZXZ, true);
        assert_eq!(part_budgets(&p, 100), vec![50, 50, 100, 100]);
        assert_eq!(part_budgets(&p, 7), vec![4, 3, 7, 7]);
    }

    #[test]
    fn scripted_primitives_solve_noiseless_goals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = EnvConfig::default().noiseless();
        for _ in 0..30 {
            let initial = UnitQuaternion::random(&mut rng);
            let goal = UnitQuaternion::random(&mut rng);
            let mut env = env_at(initial, cfg.clone());
            let t = execute(&mut env, &scripted(), goal, &ExecConfig::default()).unwrap();
            assert!(t.success, "distance {}", t.final_distance);
            assert!(t.final_distance < 0.1);
        }
    }

    #[test]
    fn missing_axis_is_a_config_error() {
        let mut map = BTreeMap::new();
        map.insert(Axis::Z, ScriptedController::default());
        assert!(PolicySet::new(map.clone()).is_err());
        map.insert(Axis::X, ScriptedController::default());
        let set = PolicySet::new(map).unwrap();
        let mut env = env_at(UnitQuaternion::IDENTITY, EnvConfig::default());
        let goal = UnitQuaternion::from_axis_angle(Axis::Y, 1.0).unwrap();
        let cfg = ExecConfig {
            chain: ChainChoice::Zyz,
            ..ExecConfig::default()
        };
        assert!(matches!(execute(&mut env, &set, goal, &cfg), Err(Error::Config(_))));
        let cfg = ExecConfig {
            chain: ChainChoice::Zxz,
            ..ExecConfig::default()
        };
        assert!(execute(&mut env, &set, goal, &cfg).is_ok());
    }

    fn fake(chain: Chain, success: bool, distance: f64) -> ExecTrace {
        let q = UnitQuaternion::IDENTITY;
        ExecTrace {
            chain_used: chain,
            plan: plan(&q, &q, chain, true),
            steps: vec![],
            goal: q,
            final_orientation: q,
            final_distance: distance,
            success,
            total_steps: 0,
        }
    }

    #[test]
    fn best_of_rules() {
        let pick = |a: &ExecTrace, b: &ExecTrace| pick_best(a, b).chain_used;
        let (zxz, zyz) = (Chain::ZXZ, Chain::ZYZ);
        assert_eq!(pick(&fake(zxz, true, 0.05), &fake(zyz, false, 0.2)), zxz);
        assert_eq!(pick(&fake(zxz, false, 0.2), &fake(zyz, true, 0.05)), zyz);
        assert_eq!(pick(&fake(zxz, false, 0.4), &fake(zyz, false, 0.3)), zyz);
        assert_eq!(pick(&fake(zxz, false, 0.3), &fake(zyz, false, 0.3)), zxz);
        assert_eq!(pick(&fake(zxz, true, 0.09), &fake(zyz, true, 0.01)), zxz);
    }

    #[test]
    fn best_of_uses_identical_starts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let initial = UnitQuaternion::random(&mut rng);
        let goal = UnitQuaternion::random(&mut rng);
        let env = env_at(initial, EnvConfig::default());
        let both = execute_both(&env, &scripted(), goal, &ExecConfig::default()).unwrap();
        let mut again = env.clone();
        let zxz = execute_chain(&mut again, &scripted(), goal, Chain::ZXZ, &ExecConfig::default()).unwrap();
        assert_eq!(zxz, both.zxz);
        let mut env = env.clone();
        let best = execute_best_of(&mut env, &scripted(), goal, &ExecConfig::default()).unwrap();
        assert_eq!(&best, both.best());
    }

    #[test]
    fn replan_and_carry_over_respect_the_total_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = PolicySet::uniform(ScriptedController { kp: 1.0, kd: 1.5 });
        for (replan, carry_over) in [(true, false), (false, true), (true, true)] {
            let cfg = ExecConfig {
                chain: ChainChoice::Zyz,
                replan,
                carry_over,
                ..ExecConfig::default()
            };
            for _ in 0..10 {
                let initial = UnitQuaternion::random(&mut rng);
                let goal = UnitQuaternion::random(&mut rng);
                let t = execute(&mut env_at(initial, EnvConfig::default()), &set, goal, &cfg).unwrap();
                assert!(t.total_steps <= 300);
            }
        }
    }

    #[test]
    fn traces_round_trip_as_json_lines() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let traces: Vec<_> = (0..3)
            .map(|_| {
                let initial = UnitQuaternion::random(&mut rng);
                let goal = UnitQuaternion::random(&mut rng);
                execute(
                    &mut env_at(initial, EnvConfig::default()),
                    &scripted(),
                    goal,
                    &ExecConfig::default(),
                )
                .unwrap()
            })
            .collect();
        let mut buf = Vec::new();
        write_traces(&mut buf, &traces).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        assert_eq!(read_traces(buf.as_slice()).unwrap(), traces);
    }
}
