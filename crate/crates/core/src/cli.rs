//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{Config, Experiment};
use crate::controller::{ControllerContext, ControllerRegistry};
use crate::dataset::{read_dataset_csv, validate_dataset, write_dataset_csv, SampleSet};
use crate::error::{Error, Result};
use crate::io::{self, RunManifest, RunSummary, TrajectoryTable};
use crate::model::FallbackPolicy;
use crate::plant::grid_suprema;
use crate::plot::{comparison_svg, Series};
use crate::sim::{generate_dataset, run_closed_loop, sweep_dt};

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_UNSAFE: i32 = 4;

const FILES_HELP: &str = "\
Output files:
  dataset.csv      t_start, t_end, x_start_0.., u_held_0.., x_end_0..
  trajectory.csv   t, x_0.., u_0.., h  (fine trace; u is the input held over the row's period)
  diagnostics.csv  t, h, status, sample, p_star, ball_radius, u_0.., margin_0..margin_3, gronwall_term
                   (one row per sampling instant; status is certified, baseline or fallback)
  sweep.csv        dt, gronwall_term, probe_states, feasible_fraction, closed_loop_steps,
                   closed_loop_certified, min_h, halted
  summary.toml, comparison.toml, comparison.svg, manifest.toml

Exit codes: 0 success, 1 I/O or other error, 2 configuration or usage error,
3 synthesis infeasible under fail-stop, 4 unsafe trajectory (min h < 0).";

#[derive(Debug, Parser)]
#[command(name = "sdcbf", version, about = "Safe sampled-data control synthesis from recorded samples", after_help = FILES_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Experiment config (TOML); the built-in DC-motor setup when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sample dataset from random open-loop runs.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-loop run with the synthesized or the known-dynamics controller.
    Run {
        #[command(flatten)]
        common: Common,
        /// Sample dataset (required for the synthesized controller).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// synth or baseline.
        #[arg(long, default_value = "synth")]
        controller: String,
        /// Override the sampling period.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the number of sampling periods.
        #[arg(long)]
        horizon: Option<usize>,
        /// Override the fallback policy (fail-stop or reuse-nearest-sample-input).
        #[arg(long)]
        fallback: Option<FallbackPolicy>,
    },
    /// Overlay two trajectory CSVs and report safety metrics.
    Compare {
        traj_a: PathBuf,
        traj_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Config whose barrier defines the boundary distance.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = ["a".to_string(), "b".to_string()])]
        labels: Vec<String>,
    },
    /// Feasibility and Grönwall term across sampling periods.
    SweepDt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated sampling periods.
        #[arg(long, value_delimiter = ',', default_values_t = [0.002, 0.005, 0.01, 0.02])]
        dt: Vec<f64>,
        /// Closed-loop horizon in seconds.
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        /// Probe grid points per state axis.
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        fallback: Option<FallbackPolicy>,
    },
    /// Grid suprema of ‖f + g u‖ and ‖g‖ for the configured plant and boxes.
    Suprema {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Infeasible,
    Unsafe,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => 0,
            Self::Infeasible => EXIT_INFEASIBLE,
            Self::Unsafe => EXIT_UNSAFE,
        }
    }
}

pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::UnknownStrategy { .. }
        | Error::InvalidValue { .. }
        | Error::Dimension { .. }
        | Error::EmptyDataset => EXIT_CONFIG,
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::UnsafeState { .. } => EXIT_UNSAFE,
        _ => EXIT_OTHER,
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match execute(cli) {
        Ok(o) => o.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn prepare(common: &Common) -> Result<(Config, Experiment)> {
    let mut config = load_config(common.config.as_deref())?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let exp = config.build()?;
    std::fs::create_dir_all(&common.out)?;
    Ok((config, exp))
}

fn load_samples(path: &Path) -> Result<Arc<SampleSet>> {
    let triples = read_dataset_csv(File::open(path).map_err(|e| {
        Error::Config(format!("cannot open dataset {}: {e}", path.display()))
    })?)?;
    Ok(Arc::new(SampleSet::new(triples)?))
}

pub fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::GenData { common } => cmd_gen_data(&common),
        Command::Run {
            common,
            dataset,
            controller,
            dt,
            horizon,
            fallback,
        } => cmd_run(&common, dataset.as_deref(), &controller, dt, horizon, fallback),
        Command::Compare {
            traj_a,
            traj_b,
            out,
            config,
            labels,
        } => cmd_compare(&traj_a, &traj_b, &out, config.as_deref(), &labels),
        Command::SweepDt {
            common,
            dataset,
            dt,
            horizon,
            grid,
            fallback,
        } => cmd_sweep_dt(&common, &dataset, &dt, horizon, grid, fallback),
        Command::Suprema { config, grid } => cmd_suprema(config.as_deref(), grid),
    }
}

fn cmd_gen_data(common: &Common) -> Result<Outcome> {
    let (_, exp) = prepare(common)?;
    let triples = generate_dataset(
        exp.plant.as_ref(),
        exp.plan,
        &exp.cfg.input_box,
        &exp.cfg.operating_box,
        &exp.barrier,
        exp.seed,
    )?;
    let path = common.out.join("dataset.csv");
    write_dataset_csv(&triples, io::create_file(&path)?)?;
    io::write_toml(
        &RunManifest::new("gen-data", common.config.as_deref(), None, &common.out, exp.seed),
        &common.out.join("manifest.toml"),
    )?;
    println!("wrote {} triples to {}", triples.len(), path.display());
    Ok(Outcome::Ok)
}

fn cmd_run(
    common: &Common,
    dataset: Option<&Path>,
    controller: &str,
    dt: Option<f64>,
    horizon: Option<usize>,
    fallback: Option<FallbackPolicy>,
) -> Result<Outcome> {
    let (_, mut exp) = prepare(common)?;
    if let Some(dt) = dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("--dt must be positive, got {dt}")));
        }
        exp.cfg.dt = dt;
    }
    if let Some(f) = fallback {
        exp.cfg.fallback_policy = f;
    }
    let horizon = horizon.unwrap_or(exp.horizon_steps);
    let samples = match (controller, dataset) {
        ("synth", None) => return Err(Error::Config("--dataset is required for the synth controller".into())),
        (_, Some(p)) => Some(load_samples(p)?),
        (_, None) => None,
    };
    if let Some(s) = &samples {
        let report = validate_dataset(s.triples(), &exp.barrier, &exp.cfg);
        if !report.flagged.is_empty() {
            eprintln!("warning: {} of {} dataset triples are inadmissible", report.flagged.len(), s.len());
        }
    }
    let ctx = ControllerContext {
        cfg: exp.cfg.clone(),
        spec: exp.spec.clone(),
        barrier: exp.barrier.clone(),
        samples,
        known_plant: (controller == "baseline").then(|| exp.plant.clone()),
        sample_selection: exp.sample_selection.clone(),
        p_selection: exp.p_selection.clone(),
    };
    let mut ctl = ControllerRegistry::default().build(controller, &ctx)?;
    let run = run_closed_loop(
        exp.plant.as_ref(),
        ctl.as_mut(),
        &exp.x0,
        exp.cfg.dt,
        horizon,
        &exp.cfg,
        &exp.barrier,
    )?;

    let m = exp.cfg.input_dim();
    let out = &common.out;
    io::write_trajectory_csv(&run, m, &exp.barrier, io::create_file(&out.join("trajectory.csv"))?)?;
    io::write_diagnostics_csv(&run.steps, m, io::create_file(&out.join("diagnostics.csv"))?)?;
    let summary = RunSummary::new(ctl.name(), &run, horizon, &exp.barrier);
    io::write_toml(&summary, &out.join("summary.toml"))?;
    io::write_toml(
        &RunManifest::new("run", common.config.as_deref(), dataset, out, exp.seed),
        &out.join("manifest.toml"),
    )?;
    println!(
        "{}: min_h = {}, {} of {} steps, {} certified, {} fallback",
        summary.controller, summary.min_h, summary.steps, horizon, summary.certified_steps, summary.fallback_steps
    );
    if let Some(h) = &summary.halted {
        eprintln!("halted at {h}");
        return Ok(Outcome::Infeasible);
    }
    if !summary.safe {
        eprintln!("trajectory left the safe set");
        return Ok(Outcome::Unsafe);
    }
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct ComparisonEntry {
    label: String,
    path: PathBuf,
    rows: usize,
    min_h: f64,
    mean_boundary_distance: f64,
    min_boundary_distance: f64,
}

#[derive(Debug, Serialize)]
struct Comparison {
    /// Largest state difference over the common rows.
    max_state_difference: f64,
    max_h_difference: f64,
    common_rows: usize,
    trajectories: Vec<ComparisonEntry>,
}

fn cmd_compare(a: &Path, b: &Path, out: &Path, config: Option<&Path>, labels: &[String]) -> Result<Outcome> {
    let exp = load_config(config)?.build()?;
    let read = |p: &Path| -> Result<TrajectoryTable> {
        io::read_trajectory_csv(File::open(p)?).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
    };
    let (ta, tb) = (read(a)?, read(b)?);
    if ta.state_dim() != tb.state_dim() {
        return Err(Error::Dimension {
            what: "trajectory state",
            expected: ta.state_dim(),
            got: tb.state_dim(),
        });
    }
    let label = |i: usize| labels.get(i).cloned().unwrap_or_else(|| ["a", "b"][i].to_string());
    let entry = |i: usize, p: &Path, t: &TrajectoryTable| {
        let d: Vec<f64> = t.x.iter().map(|x| exp.barrier.barrier().boundary_distance(x)).collect();
        ComparisonEntry {
            label: label(i),
            path: p.to_path_buf(),
            rows: t.t.len(),
            min_h: t.h.iter().cloned().fold(f64::INFINITY, f64::min),
            mean_boundary_distance: d.iter().sum::<f64>() / d.len() as f64,
            min_boundary_distance: d.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    };
    let common_rows = ta.t.len().min(tb.t.len());
    let max_state_difference = ta
        .x
        .iter()
        .zip(&tb.x)
        .map(|(p, q)| crate::linalg::dist(p, q))
        .fold(0.0, f64::max);
    let max_h_difference = ta.h.iter().zip(&tb.h).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let report = Comparison {
        max_state_difference,
        max_h_difference,
        common_rows,
        trajectories: vec![entry(0, a, &ta), entry(1, b, &tb)],
    };
    std::fs::create_dir_all(out)?;
    io::write_toml(&report, &out.join("comparison.toml"))?;
    let (la, lb) = (label(0), label(1));
    let svg = comparison_svg(
        &[Series { label: &la, table: &ta }, Series { label: &lb, table: &tb }],
        &exp.barrier.barrier().axis_boundaries(),
    );
    std::fs::write(out.join("comparison.svg"), svg)?;
    for e in &report.trajectories {
        println!(
            "{}: min_h = {}, mean boundary distance = {}",
            e.label, e.min_h, e.mean_boundary_distance
        );
    }
    println!("max state difference = {}", report.max_state_difference);
    Ok(Outcome::Ok)
}

fn cmd_sweep_dt(
    common: &Common,
    dataset: &Path,
    dts: &[f64],
    horizon: f64,
    grid: usize,
    fallback: Option<FallbackPolicy>,
) -> Result<Outcome> {
    let (_, mut exp) = prepare(common)?;
    if let Some(f) = fallback {
        exp.cfg.fallback_policy = f;
    }
    if dts.is_empty() || dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::Config("--dt values must be positive".into()));
    }
    let samples = load_samples(dataset)?;
    let rows = sweep_dt(
        exp.plant.as_ref(),
        &samples,
        dts,
        &exp.cfg,
        &exp.spec,
        &exp.barrier,
        (&exp.sample_selection, &exp.p_selection),
        &exp.x0,
        horizon,
        grid,
    )?;
    let mut w = csv::Writer::from_writer(io::create_file(&common.out.join("sweep.csv"))?);
    w.write_record([
        "dt",
        "gronwall_term",
        "probe_states",
        "feasible_fraction",
        "closed_loop_steps",
        "closed_loop_certified",
        "min_h",
        "halted",
    ])?;
    for r in &rows {
        w.write_record([
            format!("{:?}", r.dt),
            format!("{:?}", r.gronwall_term),
            r.probe_states.to_string(),
            format!("{:?}", r.feasible_fraction),
            r.closed_loop_steps.to_string(),
            r.closed_loop_certified.to_string(),
            format!("{:?}", r.min_h),
            r.halted.to_string(),
        ])?;
        println!(
            "dt = {}: gronwall = {:.6e}, feasible fraction = {:.4}, min_h = {}",
            r.dt, r.gronwall_term, r.feasible_fraction, r.min_h
        );
    }
    w.flush()?;
    io::write_toml(
        &RunManifest::new("sweep-dt", common.config.as_deref(), Some(dataset), &common.out, exp.seed),
        &common.out.join("manifest.toml"),
    )?;
    Ok(Outcome::Ok)
}

fn cmd_suprema(config: Option<&Path>, grid: usize) -> Result<Outcome> {
    let exp = load_config(config)?.build()?;
    if grid < 2 {
        return Err(Error::Config("--grid must be at least 2".into()));
    }
    let s = grid_suprema(exp.plant.as_ref(), &exp.cfg.operating_box, &exp.cfg.input_box, grid);
    println!("beta_norm = {}", s.beta_norm);
    println!("g_sup = {}", s.g_sup);
    Ok(Outcome::Ok)
}
