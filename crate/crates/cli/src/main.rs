use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use chainrot::bench::{evaluate_cases, gen_testset, EvalOptions, EvalReport, TestSet};
use chainrot::config::KeyValues;
use chainrot::env::TaskKind;
use chainrot::hier::{write_traces, ChainChoice, ExecConfig, PolicySet};
use chainrot::learner::checkpoint;
use chainrot::learner::train::{load_run_config, save_curve, train_with};
use chainrot::learner::PolicyParams;
use chainrot::rotation::{decompose, plan, relative_rotation, Chain, UnitQuaternion};

#[derive(Parser)]
#[command(
    name = "chainrot",
    version,
    about = "Chained single-axis cube rotations with learned primitives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the chain angles and the subgoal plan between two orientations.
    Decompose {
        /// Start orientation as w,x,y,z.
        #[arg(long, default_value = "1,0,0,0")]
        initial: String,
        /// Goal orientation as w,x,y,z.
        #[arg(long, default_value = "1,0,0,0")]
        goal: String,
        /// Chain such as zxz; all six proper-Euler chains when omitted.
        #[arg(long)]
        chain: Option<String>,
        /// Keep angles above a quarter turn whole.
        #[arg(long)]
        no_split: bool,
    },
    /// Generate the stratified test set.
    GenTestset {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a policy and write its checkpoint and learning curve.
    Train {
        /// rotate-z, rotate-x, rotate-y, rotate-parallel or rotate-xyz.
        #[arg(long)]
        task: String,
        /// Key-value run file; the desk preset when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint path; the curve goes next to it as <stem>.curve.csv.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the run file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Print one line per training cycle.
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate chained primitives and an optional end-to-end policy.
    Eval {
        #[arg(long)]
        testset: PathBuf,
        /// Primitive checkpoints (z plus x and/or y).
        #[arg(long, num_args = 1.., required = true)]
        policies: Vec<PathBuf>,
        /// End-to-end checkpoint run directly on each goal.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Report CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Noise seed shared by all methods on each case.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Execution traces as JSON lines.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// zxz, zyz or best.
        #[arg(long, default_value = "best")]
        chain: String,
        #[arg(long)]
        no_split: bool,
        /// Only the first N cases.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Render a report CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

fn parse_quaternion(text: &str) -> Result<UnitQuaternion> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("quaternion {text:?}"))?;
    if v.len() != 4 {
        bail!("quaternion {text:?} needs four components w,x,y,z");
    }
    Ok(UnitQuaternion::new(v[0], v[1], v[2], v[3])?)
}

fn run_decompose(initial: &str, goal: &str, chain: Option<&str>, split: bool) -> Result<()> {
    let initial = parse_quaternion(initial)?;
    let goal = parse_quaternion(goal)?;
    let chains = match chain {
        Some(c) => vec![c.parse::<Chain>()?],
        None => Chain::ALL.to_vec(),
    };
    let relative = relative_rotation(&initial, &goal);
    for chain in chains {
        println!("{chain} {}", decompose(&relative, chain));
        for (k, step) in plan(&initial, &goal, chain, split).steps.iter().enumerate() {
            println!("  step {k}: {} {:.9} -> {}", step.axis, step.angle, step.subgoal);
        }
    }
    Ok(())
}

fn curve_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "policy".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.curve.csv"))
}

fn run_train(task: &str, config: Option<&Path>, out: &Path, seed: Option<u64>, verbose: bool) -> Result<()> {
    let task: TaskKind = task.parse()?;
    let kv = match config {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::default(),
    };
    let (env, mut train_config) = load_run_config(&kv, task)?;
    if let Some(seed) = seed {
        train_config.seed = seed;
    }
    let outcome = train_with(task, env, train_config, |point, diag| {
        if verbose {
            eprintln!(
                "cycle {:>5} steps {:>9} success {:.3} critic {:.4}",
                point.cycle, point.env_steps, point.success_rate, diag.mean_critic_loss
            );
        }
    })?;
    checkpoint::save(&outcome.params, out)?;
    save_curve(&curve_path(out), &outcome.curve)?;
    println!(
        "{task}: {} env steps, best held-out success {:.3} (cycle {})",
        outcome.env_steps,
        outcome.best_success(),
        outcome.selected_cycle
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    testset: &Path,
    policies: &[PathBuf],
    baseline: Option<&Path>,
    out: &Path,
    seed: u64,
    traces: Option<&Path>,
    chain: &str,
    split: bool,
    limit: Option<usize>,
) -> Result<()> {
    let mut set = TestSet::load(testset)?;
    if let Some(n) = limit {
        set.cases.truncate(n);
    }
    let loaded = policies
        .iter()
        .map(|p| checkpoint::load(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<PolicyParams>>>()?;
    let env_config = loaded[0].env_config.clone();
    let policy_set = PolicySet::from_checkpoints(loaded)?;
    let baseline = baseline
        .map(|p| checkpoint::load(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    let options = EvalOptions {
        env_config,
        exec: ExecConfig {
            chain: chain.parse::<ChainChoice>()?,
            split_large: split,
            ..ExecConfig::default()
        },
        seed,
        ..EvalOptions::default()
    };
    let mut trace_buf = Vec::new();
    let outcomes = evaluate_cases(
        &set,
        &policy_set,
        baseline.as_ref(),
        &options,
        traces.is_some().then_some(&mut trace_buf),
    )?;
    let report = EvalReport::from_outcomes(&outcomes);
    std::fs::write(out, report.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = traces {
        let mut w = BufWriter::new(File::create(path)?);
        write_traces(&mut w, &trace_buf)?;
        w.flush()?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn run_report(input: &Path, format: Format) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report = EvalReport::from_csv(&text)?;
    match format {
        Format::Csv => print!("{}", report.to_csv()),
        Format::Table => print!("{}", report.to_table()),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decompose {
            initial,
            goal,
            chain,
            no_split,
        } => run_decompose(&initial, &goal, chain.as_deref(), !no_split),
        Command::GenTestset { seed, out } => {
            let set = gen_testset(seed);
            set.save(&out)?;
            println!("wrote {} cases to {}", set.cases.len(), out.display());
            Ok(())
        }
        Command::Train {
            task,
            config,
            out,
            seed,
            verbose,
        } => run_train(&task, config.as_deref(), &out, seed, verbose),
        Command::Eval {
            testset,
            policies,
            baseline,
            out,
            seed,
            traces,
            chain,
            no_split,
            limit,
        } => run_eval(
            &testset,
            &policies,
            baseline.as_deref(),
            &out,
            seed,
            traces.as_deref(),
            &chain,
            !no_split,
            limit,
        ),
        Command::Report { input, format } => run_report(&input, format),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
