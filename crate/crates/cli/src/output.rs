//! CSV rows, sweep tables and run metadata.

use std::fs;
use std::io::Write;
use std::path::Path;

use offload_core::model::{Allocation, CellGrid, EnergyReport};
use offload_core::online::{LeftoverSchedule, OnlineReport};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One (RSU, vehicle) cell of a schedule. `k` and `u` are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub scenario_id: String,
    pub solver: String,
    /// `arrival` for scheduled vehicles, `leftover` for vehicles carried over
    /// into an online epoch (their `u` restarts at 1).
    pub group: String,
    pub k: usize,
    pub u: usize,
    pub x: f64,
    pub f_hz: f64,
    pub p_w: f64,
    pub t_cp_s: f64,
    pub t_cm_s: f64,
    pub s_cp_s: f64,
    /// Empty for leftovers, whose transmission is not rescheduled.
    pub s_cm_s: Option<f64>,
    pub e_cp_j: f64,
    pub e_cm_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub solver: String,
    pub status: String,
    pub total_j: Option<f64>,
    pub e_cp_j: Option<f64>,
    pub e_cm_j: Option<f64>,
    /// Largest `|Σ_k x − 1|` over the scheduled vehicles.
    pub max_split_error: Option<f64>,
    pub message: String,
}

pub fn allocation_rows(
    scenario_id: &str,
    solver: &str,
    alloc: &Allocation,
    report: &EnergyReport,
) -> Vec<AllocationRow> {
    let mut rows = Vec::with_capacity(alloc.rsus() * alloc.vehicles());
    for u in 0..alloc.vehicles() {
        for k in 0..alloc.rsus() {
            rows.push(AllocationRow {
                scenario_id: scenario_id.into(),
                solver: solver.into(),
                group: "arrival".into(),
                k: k + 1,
                u: u + 1,
                x: alloc.x.get(k, u),
                f_hz: alloc.f_hz.get(k, u),
                p_w: alloc.p_w.get(k, u),
                t_cp_s: alloc.t_cp_s.get(k, u),
                t_cm_s: alloc.t_cm_s.get(k, u),
                s_cp_s: alloc.s_cp_s.get(k, u),
                s_cm_s: Some(alloc.s_cm_s.get(k, u)),
                e_cp_j: report.e_cp_j.get(k, u),
                e_cm_j: report.e_cm_j.get(k, u),
            });
        }
    }
    rows
}

pub fn leftover_rows(
    scenario_id: &str,
    solver: &str,
    sched: &LeftoverSchedule,
    report: &OnlineReport,
) -> Vec<AllocationRow> {
    let grid = &sched.residual_split;
    let mut rows = Vec::new();
    for q in 0..grid.vehicles() {
        for k in 0..grid.rsus() {
            rows.push(AllocationRow {
                scenario_id: scenario_id.into(),
                solver: solver.into(),
                group: "leftover".into(),
                k: k + 1,
                u: q + 1,
                x: grid.get(k, q),
                f_hz: sched.f_hz.get(k, q),
                p_w: sched.power_w.get(k, q),
                t_cp_s: sched.t_cp_s.get(k, q),
                t_cm_s: sched.t_cm_s.get(k, q),
                s_cp_s: sched.s_cp_s.get(k, q),
                s_cm_s: None,
                e_cp_j: report.leftover_cp_j.get(k, q),
                e_cm_j: report.leftover_cm_j.get(k, q),
            });
        }
    }
    rows
}

/// Rebuilds the arrival schedule of one solver run from its rows.
pub fn allocation_from_rows(rows: &[AllocationRow], rsus: usize, vehicles: usize) -> Allocation {
    let mut a = Allocation::zeros(rsus, vehicles);
    for r in rows.iter().filter(|r| r.group == "arrival") {
        let (k, u) = (r.k - 1, r.u - 1);
        a.x.set(k, u, r.x);
        a.f_hz.set(k, u, r.f_hz);
        a.p_w.set(k, u, r.p_w);
        a.t_cp_s.set(k, u, r.t_cp_s);
        a.t_cm_s.set(k, u, r.t_cm_s);
        a.s_cp_s.set(k, u, r.s_cp_s);
        a.s_cm_s.set(k, u, r.s_cm_s.unwrap_or(0.0));
    }
    a
}

pub fn max_split_error(x: &CellGrid) -> f64 {
    (0..x.vehicles()).map(|u| (x.column_sum(u) - 1.0).abs()).fold(0.0, f64::max)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| io_err(path, e))
}

/// Writes a header-less CSV with the given header names when `rows` is empty
/// (the csv writer only emits headers alongside the first record).
pub fn write_csv_or_header<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), CliError> {
    if rows.is_empty() {
        fs::write(path, format!("{}\n", header.join(","))).map_err(|e| io_err(path, e))
    } else {
        write_csv(path, rows)
    }
}

pub const ALLOCATION_HEADER: &[&str] = &[
    "scenario_id",
    "solver",
    "group",
    "k",
    "u",
    "x",
    "f_hz",
    "p_w",
    "t_cp_s",
    "t_cm_s",
    "s_cp_s",
    "s_cm_s",
    "e_cp_j",
    "e_cm_j",
];

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLine {
    pub value: f64,
    pub solver: String,
    pub total_j: Option<f64>,
    pub status: String,
}

/// Whitespace-delimited table, one line per grid point and solver, in grid
/// order. Missing energies are written as NaN.
pub fn write_sweep_table(path: &Path, column: &str, lines: &[SweepLine]) -> Result<(), CliError> {
    let mut out = format!("# {column} solver total_j status\n");
    for l in lines {
        let total = l.total_j.map_or_else(|| "NaN".to_string(), |t| format!("{t:e}"));
        out.push_str(&format!("{} {} {} {}\n", l.value, l.solver, total, l.status));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Same data with one column per solver, for `plot ... using 1:2`.
pub fn write_sweep_wide(path: &Path, column: &str, solvers: &[&str], lines: &[SweepLine]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = solvers.iter().map(|s| format!("{s}_j")).collect();
    let mut out = format!("# {column} {}\n", header.join(" "));
    for chunk in lines.chunks(solvers.len()) {
        out.push_str(&chunk[0].value.to_string());
        for l in chunk {
            out.push(' ');
            out.push_str(&l.total_j.map_or_else(|| "NaN".to_string(), |t| format!("{t:e}")));
        }
        out.push('\n');
    }
    f.write_all(out.as_bytes()).map_err(|e| io_err(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}
