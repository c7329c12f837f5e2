//! One solver call per function, each turned into rows and a summary.

use offload_core::baselines::{run_baseline, BaselineKind};
use offload_core::model::{Allocation, EnergyReport};
use offload_core::multi::{schedule_solver_options, solve_multi_with};
use offload_core::online::{solve_online_with, OnlineInstance};
use offload_core::single::{solve_single, SingleVehicleInstance};
use offload_core::OffloadError;

use crate::output::{allocation_rows, leftover_rows, max_split_error, AllocationRow, SummaryRow};
use crate::scenario::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    ProposedSingle,
    ProposedMulti,
    Online,
    Baseline(BaselineKind),
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Self::ProposedSingle => "proposed_single",
            Self::ProposedMulti => "proposed_multi",
            Self::Online => "online",
            Self::Baseline(BaselineKind::Bef) => "bef",
            Self::Baseline(BaselineKind::Bel) => "bel",
        }
    }

    /// The proposed offline solver for `vehicles` vehicles.
    pub fn proposed(vehicles: usize) -> Self {
        if vehicles == 1 {
            Self::ProposedSingle
        } else {
            Self::ProposedMulti
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunData {
    pub rows: Vec<AllocationRow>,
    pub total_j: f64,
    pub e_cp_j: f64,
    pub e_cm_j: f64,
    pub max_split_error: f64,
    pub status: &'static str,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario_id: String,
    pub solver: Solver,
    pub result: Result<RunData, OffloadError>,
}

impl RunOutput {
    pub fn total_j(&self) -> Option<f64> {
        self.result.as_ref().ok().map(|d| d.total_j)
    }

    pub fn status(&self) -> &'static str {
        match &self.result {
            Ok(d) => d.status,
            Err(e) => error_status(e),
        }
    }

    pub fn summary(&self) -> SummaryRow {
        let (total_j, e_cp_j, e_cm_j, max_split_error, message) = match &self.result {
            Ok(d) => (Some(d.total_j), Some(d.e_cp_j), Some(d.e_cm_j), Some(d.max_split_error), String::new()),
            Err(e) => (None, None, None, None, e.to_string()),
        };
        SummaryRow {
            scenario_id: self.scenario_id.clone(),
            solver: self.solver.name().into(),
            status: self.status().into(),
            total_j,
            e_cp_j,
            e_cm_j,
            max_split_error,
            message,
        }
    }
}

pub fn error_status(e: &OffloadError) -> &'static str {
    match e {
        OffloadError::InvalidInput(_) => "InvalidInput",
        OffloadError::InfeasibleInput(_) | OffloadError::Infeasible(_) => "Infeasible",
        OffloadError::NotConverged(_) => "NotConverged",
    }
}

fn offline_data(id: &str, solver: Solver, alloc: &Allocation, report: &EnergyReport, status: &'static str) -> RunData {
    RunData {
        rows: allocation_rows(id, solver.name(), alloc, report),
        total_j: report.total_j,
        e_cp_j: report.e_cp_j.sum(),
        e_cm_j: report.e_cm_j.sum(),
        max_split_error: max_split_error(&alloc.x),
        status,
    }
}

/// Runs one offline solver on the model's network and vehicles.
pub fn run_offline(model: &Model, solver: Solver) -> RunOutput {
    let id = model.id.as_str();
    let result = match solver {
        Solver::ProposedSingle => {
            if model.vehicles.len() != 1 {
                Err(OffloadError::InvalidInput(format!(
                    "vehicles: the single-vehicle solver needs exactly one vehicle, got {}",
                    model.vehicles.len()
                )))
            } else {
                SingleVehicleInstance::new(model.net.clone(), model.vehicles[0])
                    .and_then(|inst| solve_single(&inst))
                    .map(|(a, r)| offline_data(id, solver, &a, &r, "Optimal"))
            }
        }
        Solver::ProposedMulti => solve_multi_with(&model.net, &model.vehicles, &schedule_solver_options())
            .map(|s| offline_data(id, solver, &s.allocation, &s.report, "Optimal")),
        Solver::Baseline(kind) => {
            run_baseline(&model.net, &model.vehicles, kind).map(|(a, r)| offline_data(id, solver, &a, &r, "Evaluated"))
        }
        Solver::Online => return run_online_instance(id, model.online.as_ref()),
    };
    RunOutput { scenario_id: id.into(), solver, result }
}

fn run_online_instance(id: &str, inst: Option<&OnlineInstance>) -> RunOutput {
    let result = match inst {
        None => Err(OffloadError::InvalidInput("online: section missing".into())),
        Some(inst) => solve_online_with(inst, &schedule_solver_options()).map(|s| {
            let name = Solver::Online.name();
            let mut rows = allocation_rows(id, name, &s.allocation, &s.report.arrivals);
            rows.extend(leftover_rows(id, name, &s.leftovers, &s.report));
            RunData {
                rows,
                total_j: s.report.total_j,
                e_cp_j: s.report.arrivals.e_cp_j.sum() + s.report.leftover_cp_j.sum(),
                e_cm_j: s.report.arrivals.e_cm_j.sum() + s.report.leftover_cm_j.sum(),
                max_split_error: max_split_error(&s.allocation.x),
                status: "Optimal",
            }
        }),
    };
    RunOutput { scenario_id: id.into(), solver: Solver::Online, result }
}
