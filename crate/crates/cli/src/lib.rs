//! Scenario files, solver dispatch and sweeps for the `offload` binary.
//!
//! Exit codes: 0 success, 1 solver or I/O failure, 2 parse or validation
//! error, 3 infeasible scenario, 4 failed verification.

pub mod output;
pub mod run;
pub mod scenario;
pub mod sweep;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use offload_core::baselines::BaselineKind;
use offload_core::multi::schedule_solver_options;
use offload_core::OffloadError;
use serde_json::json;

use output::{write_csv, write_csv_or_header, write_json, write_sweep_table, write_sweep_wide, ALLOCATION_HEADER};
use run::{run_offline, RunOutput, Solver};
use scenario::{Model, ScenarioFile, SweepParameter, SweepSection};
use sweep::SWEEP_SOLVERS;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invalid(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Verification(_) => 4,
            Self::Io(_) | Self::Solver(_) => 1,
        }
    }
}

impl From<OffloadError> for CliError {
    fn from(e: OffloadError) -> Self {
        match e {
            OffloadError::InvalidInput(m) => Self::Invalid(m),
            OffloadError::InfeasibleInput(m) | OffloadError::Infeasible(m) => Self::Infeasible(m),
            OffloadError::NotConverged(m) => Self::Solver(format!("solver did not converge: {m}")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "offload",
    version,
    about = "Minimum-energy task offloading schedules for vehicles along an RSU chain"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario document (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Bef,
    Bel,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-vehicle solver (exactly one vehicle).
    SolveSingle(Common),
    /// Joint schedule for all vehicles.
    SolveMulti(Common),
    /// Re-optimize at the `online` decision time.
    SolveOnline(Common),
    /// BEF/BEL splits with deadline-tight schedules.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "both")]
        kind: KindArg,
    },
    /// Proposed solver and both baselines over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Threads for grid points (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the scenario's sweep parameter.
        #[arg(long, value_enum)]
        param: Option<SweepParameter>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Solve and check the result against the oracles.
    Verify(Common),
}

fn load(common: &Common) -> Result<(ScenarioFile, Model), CliError> {
    let file = ScenarioFile::load(&common.scenario)?;
    let model = file.to_model()?;
    std::fs::create_dir_all(&common.out).map_err(|e| CliError::Io(format!("{}: {e}", common.out.display())))?;
    Ok((file, model))
}

fn metadata(command: &str, model: &Model, extra: serde_json::Value) -> serde_json::Value {
    let opts = schedule_solver_options();
    let mut meta = json!({
        "scenario_id": model.id,
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "rsus": model.net.num_rsus(),
        "vehicles": model.vehicles.len(),
        "leftovers": model.online.as_ref().map_or(0, |o| o.leftovers.len()),
        "assumptions": model.assumptions,
        "units": "SI: seconds, hertz, watts, joules; k and u are one-based",
        "solver": {
            "barrier_mu": opts.barrier_mu,
            "barrier_t0": opts.barrier_t0,
            "newton_tol": opts.newton_tol,
            "duality_gap_tol": opts.duality_gap_tol,
        },
    });
    if let (Some(m), Some(e)) = (meta.as_object_mut(), extra.as_object()) {
        m.extend(e.clone());
    }
    meta
}

/// Writes allocations and summaries of `runs`. The first failed run decides
/// the error returned afterwards.
fn emit(out: &Path, runs: &[RunOutput]) -> Result<(), CliError> {
    let rows: Vec<_> = runs.iter().filter_map(|r| r.result.as_ref().ok()).flat_map(|d| d.rows.clone()).collect();
    write_csv_or_header(&out.join("allocations.csv"), &rows, ALLOCATION_HEADER)?;
    let summary: Vec<_> = runs.iter().map(RunOutput::summary).collect();
    write_csv(&out.join("summary.csv"), &summary)?;
    match runs.iter().find_map(|r| r.result.as_ref().err()) {
        Some(e) => Err(e.clone().into()),
        None => Ok(()),
    }
}

fn solve(common: &Common, name: &str, solvers: &[Solver]) -> Result<(), CliError> {
    let (_, model) = load(common)?;
    let runs: Vec<_> = solvers.iter().map(|&s| run_offline(&model, s)).collect();
    write_json(&common.out.join("metadata.json"), &metadata(name, &model, json!({})))?;
    emit(&common.out, &runs)
}

fn sweep_spec(
    file: &ScenarioFile,
    param: Option<SweepParameter>,
    from: Option<f64>,
    to: Option<f64>,
    steps: Option<usize>,
) -> Result<SweepSection, CliError> {
    let base = file.sweep;
    let missing =
        |name: &str| CliError::Invalid(format!("sweep.{name}: not given in the scenario or on the command line"));
    Ok(SweepSection {
        parameter: param.or(base.map(|s| s.parameter)).ok_or_else(|| missing("parameter"))?,
        from: from.or(base.map(|s| s.from)).ok_or_else(|| missing("from"))?,
        to: to.or(base.map(|s| s.to)).ok_or_else(|| missing("to"))?,
        steps: steps.or(base.map(|s| s.steps)).ok_or_else(|| missing("steps"))?,
    })
}

fn run_sweep(common: &Common, workers: usize, spec: SweepSection) -> Result<(), CliError> {
    let (file, model) = load(common)?;
    let points = sweep::sweep(&file, &spec, workers)?;
    let runs: Vec<RunOutput> = points.iter().flat_map(|p| p.runs.clone()).collect();
    let rows: Vec<_> = runs.iter().filter_map(|r| r.result.as_ref().ok()).flat_map(|d| d.rows.clone()).collect();
    write_csv_or_header(&common.out.join("allocations.csv"), &rows, ALLOCATION_HEADER)?;
    let summary: Vec<_> = runs.iter().map(RunOutput::summary).collect();
    write_csv(&common.out.join("summary.csv"), &summary)?;
    let lines: Vec<_> = points.iter().flat_map(|p| p.lines()).collect();
    let column = spec.parameter.column();
    write_sweep_table(&common.out.join("sweep.dat"), column, &lines)?;
    write_sweep_wide(&common.out.join("sweep_wide.dat"), column, &SWEEP_SOLVERS, &lines)?;
    let extra = json!({
        "workers": workers,
        "sweep": {
            "parameter": spec.parameter.to_string(),
            "from": spec.from,
            "to": spec.to,
            "steps": spec.steps,
            "proposed_cutoff": sweep::cutoff(&points),
        },
    });
    write_json(&common.out.join("metadata.json"), &metadata("sweep", &model, extra))
}

fn run_verify(common: &Common) -> Result<(), CliError> {
    let (_, model) = load(common)?;
    let solver = if model.online.is_some() { Solver::Online } else { Solver::proposed(model.vehicles.len()) };
    let run = run_offline(&model, solver);
    write_json(&common.out.join("metadata.json"), &metadata("verify", &model, json!({})))?;
    emit(&common.out, std::slice::from_ref(&run))?;
    let checks = verify::verify(&model)?;
    write_csv(&common.out.join("verify.csv"), &checks)?;
    for c in &checks {
        println!("{:<24} {:>12.3e} <= {:<8.1e} {}", c.check, c.value, c.limit, if c.pass { "pass" } else { "FAIL" });
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SolveSingle(c) => solve(&c, "solve-single", &[Solver::ProposedSingle]),
        Command::SolveMulti(c) => solve(&c, "solve-multi", &[Solver::ProposedMulti]),
        Command::SolveOnline(c) => solve(&c, "solve-online", &[Solver::Online]),
        Command::Baseline { common, kind } => {
            let kinds: &[BaselineKind] = match kind {
                KindArg::Bef => &[BaselineKind::Bef],
                KindArg::Bel => &[BaselineKind::Bel],
                KindArg::Both => &BaselineKind::ALL,
            };
            let solvers: Vec<_> = kinds.iter().map(|&k| Solver::Baseline(k)).collect();
            solve(&common, "baseline", &solvers)
        }
        Command::Sweep { common, workers, param, from, to, steps } => {
            let file = ScenarioFile::load(&common.scenario)?;
            let spec = sweep_spec(&file, param, from, to, steps)?;
            run_sweep(&common, workers.unwrap_or_else(default_workers), spec)
        }
        Command::Verify(c) => run_verify(&c),
    }
}
