//! Command-line runner: experiment presets, config ingestion, CSV/JSON
//! emission, and the verification suites.
//!
//! Exit codes: 0 ok, 1 verification failure, 2 usage/config error, 3 IO
//! error.

mod config;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use lbes::averaging::AveragingContext;
use lbes::presets;
use lbes::sim::{averaging_order_sweep, estimate_ultimate_bound, integrate};

use config::{resolve, ExperimentConfig, ResolvedExperiment};

#[derive(Debug)]
pub enum CliError {
    /// Bad usage or configuration (exit 2).
    Config(String),
    /// Filesystem trouble (exit 3).
    Io(String),
    /// A verification suite failed (exit 1).
    Verification,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn from_lbes(e: lbes::Error) -> Self {
        CliError::Config(e.to_string())
    }

    fn from_io(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lbes",
    version,
    about = "Simulate and verify Lie-bracket extremum-seeking systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON experiment config; overrides preset fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (example1_nonlipschitz, example2_vibrational,
    /// example5_law1_nonconvex, example6_law2_bounded).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override epsilon.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the oscillatory closed loop and write trajectory CSV plus
    /// a summary JSON.
    Simulate(CommonArgs),
    /// Evaluate the averaged field on a grid and write it as CSV.
    Average {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid as "min:max:step", applied to every state axis.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Run a named verification suite and emit a JSON report.
    Verify {
        /// One of: bump, costs, averaging, descent, order, bounds, all.
        #[arg(long)]
        suite: String,
        /// Optional path for the JSON report (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epsilon-halving closeness sweep against the averaged flow.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated decreasing epsilons, e.g. "0.2,0.1,0.05".
        #[arg(long, default_value = "0.2,0.1,0.05")]
        eps_list: String,
    },
    /// Batch ultimate-bound estimate from seeded initial conditions on a
    /// sphere.
    Bound {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 1000.0)]
        radius: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(msg) => eprintln!("config error: {msg}"),
                CliError::Io(msg) => eprintln!("io error: {msg}"),
                CliError::Verification => eprintln!("verification failed"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(common) => cmd_simulate(&common),
        Command::Average { common, grid } => cmd_average(&common, &grid),
        Command::Verify { suite, out } => cmd_verify(&suite, out.as_deref()),
        Command::Sweep { common, eps_list } => cmd_sweep(&common, &eps_list),
        Command::Bound {
            common,
            runs,
            radius,
        } => cmd_bound(&common, runs, radius),
    }
}

/// Preset + config file + flag overrides, resolved to a runnable setup.
fn load_experiment(common: &CommonArgs) -> Result<ResolvedExperiment, CliError> {
    let file_cfg: Option<ExperimentConfig> = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(CliError::from_io)?;
            Some(serde_json::from_str(&text).map_err(|e| {
                CliError::config(format!("cannot parse {}: {e}", path.display()))
            })?)
        }
        None => None,
    };

    let preset_name = common
        .preset
        .clone()
        .or_else(|| file_cfg.as_ref().and_then(|c| c.experiment.clone()));

    let mut merged = match (&preset_name, &file_cfg) {
        (Some(name), Some(cfg)) => cfg.merge_over(&ExperimentConfig::for_preset(name)?),
        (Some(name), None) => ExperimentConfig::for_preset(name)?,
        (None, Some(cfg)) => cfg.clone(),
        (None, None) => {
            return Err(CliError::config(format!(
                "either --preset or --config is required; presets: {}",
                presets::PRESET_NAMES.join(", ")
            )))
        }
    };

    // Flag-level overrides beat everything.
    let sim = merged.sim.get_or_insert_with(Default::default);
    if let Some(eps) = common.eps {
        sim.epsilon = Some(eps);
    }
    if let Some(seed) = common.seed {
        sim.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        merged.output_dir = Some(out.display().to_string());
    }

    resolve(&merged)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::from_io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(CliError::from_io)
}

#[derive(Serialize)]
struct SimulateSummary {
    experiment: String,
    epsilon: f64,
    seed: u64,
    t_final: f64,
    final_time: f64,
    final_state: Vec<f64>,
    min_norm: f64,
    /// Cost at the final state (ES experiments run in shifted
    /// coordinates, so the cost is evaluated at `x̃ + x*`).
    #[serde(skip_serializing_if = "Option::is_none")]
    final_cost: Option<f64>,
    escaped: bool,
    trajectory_csv: String,
}

fn cmd_simulate(common: &CommonArgs) -> Result<(), CliError> {
    let exp = load_experiment(common)?;
    let out_dir = PathBuf::from(&exp.output_dir);
    ensure_dir(&out_dir)?;

    let traj = integrate(&exp.system, &exp.sim).map_err(CliError::from_lbes)?;
    let csv_path = out_dir.join(format!("{}_trajectory.csv", exp.name));
    std::fs::write(&csv_path, traj.to_csv()).map_err(CliError::from_io)?;

    let final_cost = exp
        .cost
        .as_ref()
        .map(|c| c.value(&(traj.final_state() + c.x_star())));
    let summary = SimulateSummary {
        experiment: exp.name.clone(),
        epsilon: exp.sim.epsilon,
        seed: exp.sim.seed,
        t_final: exp.sim.t_final,
        final_time: traj.final_time(),
        final_state: traj.final_state().iter().copied().collect(),
        min_norm: traj.min_norm(),
        final_cost,
        escaped: traj.escaped(),
        trajectory_csv: csv_path.display().to_string(),
    };
    let summary_path = out_dir.join(format!("{}_summary.json", exp.name));
    write_json(&summary_path, &summary)?;
    println!(
        "wrote {} ({} samples{}) and {}",
        csv_path.display(),
        traj.len(),
        if traj.escaped() { ", escaped" } else { "" },
        summary_path.display()
    );
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!(
            "grid must be min:max:step, got `{spec}`"
        )));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| CliError::config(format!("bad grid number `{s}`: {e}")))
    };
    let (min, max, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step.is_nan() || step <= 0.0 || max < min {
        return Err(CliError::config("grid needs max >= min and step > 0"));
    }
    let mut vals = Vec::new();
    let n = ((max - min) / step).round() as usize;
    for k in 0..=n {
        let v = min + k as f64 * step;
        if v <= max + 1e-12 {
            vals.push(v);
        }
    }
    Ok(vals)
}

fn cmd_average(common: &CommonArgs, grid: &str) -> Result<(), CliError> {
    let exp = load_experiment(common)?;
    let out_dir = PathBuf::from(&exp.output_dir);
    ensure_dir(&out_dir)?;

    let axis = parse_grid(grid)?;
    let dim = exp.system.dim();
    let ctx = AveragingContext::with_default_nodes(
        exp.system.clone(),
        exp.deltas,
        exp.sim.epsilon,
    )
    .map_err(CliError::from_lbes)?;

    let mut csv = String::new();
    for i in 1..=dim {
        csv.push_str(&format!("x{i},"));
    }
    for i in 1..=dim {
        csv.push_str(&format!("fbar{i}"));
        csv.push(if i == dim { '\n' } else { ',' });
    }

    // Cartesian product of the axis values over all state components.
    let mut idx = vec![0usize; dim];
    loop {
        let x = DVector::from_fn(dim, |i, _| axis[idx[i]]);
        let fb = ctx.average_field(&x);
        for i in 0..dim {
            csv.push_str(&format!("{:.16e},", x[i]));
        }
        for i in 0..dim {
            csv.push_str(&format!("{:.16e}", fb[i]));
            csv.push(if i + 1 == dim { '\n' } else { ',' });
        }
        // Advance the multi-index.
        let mut carry = true;
        for slot in idx.iter_mut() {
            if carry {
                *slot += 1;
                if *slot == axis.len() {
                    *slot = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }

    let path = out_dir.join(format!("{}_average.csv", exp.name));
    std::fs::write(&path, csv).map_err(CliError::from_io)?;
    println!("wrote {} ({} grid points per axis)", path.display(), axis.len());
    Ok(())
}

fn cmd_verify(suite: &str, out: Option<&Path>) -> Result<(), CliError> {
    let report = verify::run_suite(suite).ok_or_else(|| {
        CliError::config(format!(
            "unknown suite `{suite}`; available: {}",
            verify::SUITES.join(", ")
        ))
    })?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Io(format!("serialize report: {e}")))?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    ensure_dir(parent)?;
                }
            }
            std::fs::write(path, &text).map_err(CliError::from_io)?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}

fn cmd_sweep(common: &CommonArgs, eps_list: &str) -> Result<(), CliError> {
    let exp = load_experiment(common)?;
    let out_dir = PathBuf::from(&exp.output_dir);
    ensure_dir(&out_dir)?;

    let eps: Vec<f64> = eps_list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::config(format!("bad epsilon `{s}`: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let ctx = AveragingContext::with_default_nodes(
        exp.system.clone(),
        exp.deltas,
        exp.sim.epsilon,
    )
    .map_err(CliError::from_lbes)?;
    let report = averaging_order_sweep(
        &exp.system,
        |x| ctx.average_field(x),
        exp.sim.x0.as_vector(),
        exp.sim.t_final,
        &eps,
        exp.sim.steps_per_fast_period,
    )
    .map_err(CliError::from_lbes)?;

    let path = out_dir.join(format!("{}_sweep.json", exp.name));
    write_json(&path, &report)?;
    println!(
        "wrote {} (ratios {:?}, pass: {})",
        path.display(),
        report.ratios,
        report.pass
    );
    Ok(())
}

fn cmd_bound(common: &CommonArgs, runs: usize, radius: f64) -> Result<(), CliError> {
    let exp = load_experiment(common)?;
    let out_dir = PathBuf::from(&exp.output_dir);
    ensure_dir(&out_dir)?;

    let est = estimate_ultimate_bound(&exp.system, runs, radius, &exp.sim)
        .map_err(CliError::from_lbes)?;
    let path = out_dir.join(format!("{}_bound.json", exp.name));
    write_json(&path, &est)?;
    println!(
        "wrote {} (ultimate radius {:.6}, settle time {:.3}, escapes {})",
        path.display(),
        est.ultimate_radius,
        est.settle_time,
        est.escaped_runs.len()
    );
    Ok(())
}
