//! Oracle checks run by `offload verify`.

use offload_core::baselines::{run_baseline, BaselineKind};
use offload_core::model::build_timeline;
use offload_core::multi::{schedule_solver_options, solve_multi_with, AUDIT_TOL};
use offload_core::online::solve_online_with;
use offload_core::oracle::{check_online, check_problem1, grid_search_single, GridSpec};
use offload_core::single::{h_k, solve_master, solve_single, SingleVehicleInstance};
use serde::Serialize;

use crate::scenario::Model;
use crate::CliError;

pub const KKT_TOL: f64 = 1e-6;
pub const MASTER_TOL: f64 = 1e-8;
pub const CROSS_SOLVER_TOL: f64 = 1e-4;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const DOMINANCE_MARGIN_J: f64 = 1e-8;
pub const GRID_GAP_TOL: f64 = 1e-3;
pub const ONLINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

fn at_most(name: &str, value: f64, limit: f64) -> Check {
    Check { check: name.into(), value, limit, pass: value <= limit }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Solves the scenario and checks the result against the oracles. Solver
/// failures other than infeasibility are returned as errors.
pub fn verify(model: &Model) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    if let Some(inst) = &model.online {
        let s = solve_online_with(inst, &schedule_solver_options())?;
        let audit = check_online(inst, &s.timeline, &s.allocation, &s.leftovers);
        checks.push(at_most("online-feasibility", audit.max_violation, AUDIT_TOL));
        if let Some(r) = &s.solve {
            checks.push(at_most("online-kkt", r.kkt_residuals.max(), KKT_TOL));
        }
        checks.push(at_most("online-reconstruction", rel(s.program_objective_j, s.report.total_j), IDENTITY_TOL));
        if inst.leftovers.is_empty() && inst.t_now == 0.0 && !inst.arrivals.is_empty() {
            let off = solve_multi_with(&model.net, &model.vehicles, &schedule_solver_options())?;
            checks.push(at_most("online-vs-offline", rel(s.report.total_j, off.report.total_j), ONLINE_TOL));
        }
        return Ok(checks);
    }

    let timeline = build_timeline(&model.net, &model.vehicles)?;
    let multi = solve_multi_with(&model.net, &model.vehicles, &schedule_solver_options())?;
    let audit = check_problem1(&model.net, &model.vehicles, &timeline, &multi.allocation);
    checks.push(at_most("multi-feasibility", audit.max_violation, AUDIT_TOL));
    checks.push(at_most("multi-kkt", multi.solve.kkt_residuals.max(), KKT_TOL));
    checks.push(at_most("multi-reconstruction", rel(multi.program_objective_j, multi.report.total_j), IDENTITY_TOL));
    let mut proposed = multi.report.total_j;

    if model.vehicles.len() == 1 {
        let inst = SingleVehicleInstance::new(model.net.clone(), model.vehicles[0])?;
        let master = solve_master(&inst)?;
        let nu = master.nu.nu;
        let worst = (0..inst.rsus())
            .filter(|&k| master.x[k] > 0.0 && master.x[k] < master.caps[k])
            .map(|k| (h_k(&inst, k, master.x[k]) - nu).abs() / nu)
            .fold(0.0, f64::max);
        checks.push(at_most("master-stationarity", worst, MASTER_TOL));
        let (alloc, single) = solve_single(&inst)?;
        let audit = check_problem1(&model.net, &model.vehicles, &timeline, &alloc);
        checks.push(at_most("single-feasibility", audit.max_violation, AUDIT_TOL));
        checks.push(at_most("single-vs-multi", rel(multi.report.total_j, single.total_j), CROSS_SOLVER_TOL));
        if inst.rsus() <= GridSpec::default().max_dims {
            let (_, grid) = grid_search_single(&inst, &GridSpec::default())?;
            // no grid point beats the optimum, and the best one comes close
            checks.push(at_most("grid-below", (single.total_j - grid) / grid, 1e-12));
            checks.push(at_most("grid-gap", (grid - single.total_j) / grid, GRID_GAP_TOL));
        }
        proposed = single.total_j;
    }

    if model.vehicles.len() <= 2 {
        for kind in BaselineKind::ALL {
            // an infeasible baseline has nothing to dominate
            if let Ok((_, rep)) = run_baseline(&model.net, &model.vehicles, kind) {
                checks.push(at_most(&format!("dominates-{}", kind.name()), proposed - rep.total_j, DOMINANCE_MARGIN_J));
            }
        }
    }
    Ok(checks)
}
