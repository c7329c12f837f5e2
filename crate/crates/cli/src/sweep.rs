//! Parameter sweeps: proposed solver and both baselines at every grid point.

use offload_core::baselines::BaselineKind;
use offload_core::OffloadError;
use rayon::prelude::*;

use crate::output::SweepLine;
use crate::run::{run_offline, RunOutput, Solver};
use crate::scenario::{ScenarioFile, SweepSection};
use crate::CliError;

/// Solver labels used in sweep tables, in output order.
pub const SWEEP_SOLVERS: [&str; 3] = ["proposed", "bef", "bel"];

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    /// Proposed, BEF, BEL.
    pub runs: Vec<RunOutput>,
}

impl SweepPoint {
    pub fn proposed(&self) -> &RunOutput {
        &self.runs[0]
    }

    pub fn lines(&self) -> Vec<SweepLine> {
        self.runs
            .iter()
            .zip(SWEEP_SOLVERS)
            .map(|(r, name)| SweepLine {
                value: self.value,
                solver: name.into(),
                total_j: r.total_j(),
                status: r.status().into(),
            })
            .collect()
    }
}

fn point(scenario: &ScenarioFile, spec: &SweepSection, value: f64) -> SweepPoint {
    let solvers = [
        Solver::proposed(scenario.vehicles.len()),
        Solver::Baseline(BaselineKind::Bef),
        Solver::Baseline(BaselineKind::Bel),
    ];
    // a grid value that makes the scenario invalid is recorded, not fatal
    let model = scenario.with_parameter(spec.parameter, value).and_then(|s| s.to_model());
    let runs = match model {
        Ok(m) => solvers.iter().map(|&s| run_offline(&m, s)).collect(),
        Err(e) => solvers
            .iter()
            .map(|&s| RunOutput {
                scenario_id: format!("{}@{}={}", scenario.id, spec.parameter.column(), value),
                solver: s,
                result: Err(OffloadError::InvalidInput(e.to_string())),
            })
            .collect(),
    };
    SweepPoint { value, runs }
}

/// Runs every grid point on a pool of `workers` threads. Points are
/// independent; results come back in grid order.
pub fn sweep(scenario: &ScenarioFile, spec: &SweepSection, workers: usize) -> Result<Vec<SweepPoint>, CliError> {
    let grid = spec.grid()?;
    // fail early on structural problems (e.g. a pair parameter with one vehicle)
    scenario.with_parameter(spec.parameter, grid[0])?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Solver(format!("thread pool: {e}")))?;
    Ok(pool.install(|| grid.par_iter().map(|&v| point(scenario, spec, v)).collect()))
}

/// First grid value whose proposed run is infeasible, if any.
pub fn cutoff(points: &[SweepPoint]) -> Option<f64> {
    points.iter().find(|p| matches!(p.proposed().result, Err(OffloadError::Infeasible(_)))).map(|p| p.value)
}
