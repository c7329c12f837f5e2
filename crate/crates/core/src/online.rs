//! Online re-optimization at a decision epoch `t`.
//!
//! Leftovers are vehicles already in the network: their splits, powers and
//! transmission times are fixed, only their remaining computation is
//! rescheduled. New arrivals get full allocations with computation allowed
//! from `t` on. Leftovers and arrivals never share an RSU's coverage, so at
//! every RSU the leftovers' compute queue runs before the arrivals' queue.

use crate::convex::{solve, ConvexProgram, Objective, SolveResult, SolveStatus, SolverOptions};
use crate::error::{invalid, OffloadError, Result};
use crate::model::{
    build_timeline, comp_energy, total_energy, Allocation, CellGrid, EnergyReport, NetworkConfig, Timeline, VehicleSpec,
};
use crate::multi::{
    assemble, infeasibility_reason, recover_schedule, schedule_solver_options, status_error, EnergyTerm,
    Problem2Layout, RowKind, ScheduleObjective, SplitRef, AUDIT_TOL,
};
use crate::oracle::check_online;

/// A vehicle already in the network at the decision epoch. Per-RSU vectors
/// are indexed by RSU.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftoverSpec {
    /// Fraction of the task not yet executed at each RSU.
    pub residual_split: Vec<f64>,
    pub workload_cycles: f64,
    pub result_bits: f64,
    pub power_w: Vec<f64>,
    pub t_cm_s: Vec<f64>,
    pub arrival_s: Vec<f64>,
    pub departure_s: Vec<f64>,
    pub velocity_mps: f64,
}

impl LeftoverSpec {
    fn validate(&self, net: &NetworkConfig, t_now: f64) -> Result<()> {
        let k_total = net.num_rsus();
        for (name, v) in [
            ("residual_split", &self.residual_split),
            ("power_w", &self.power_w),
            ("t_cm_s", &self.t_cm_s),
            ("arrival_s", &self.arrival_s),
            ("departure_s", &self.departure_s),
        ] {
            if v.len() != k_total {
                return Err(invalid(format!("{name} has {} entries, expected {k_total}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("{name} has a non-finite entry")));
            }
        }
        if !(self.workload_cycles > 0.0 && self.workload_cycles.is_finite()) {
            return Err(invalid(format!("workload must be positive, got {}", self.workload_cycles)));
        }
        if !(self.result_bits > 0.0 && self.result_bits.is_finite()) {
            return Err(invalid(format!("result size must be positive, got {}", self.result_bits)));
        }
        if !(self.velocity_mps > 0.0 && self.velocity_mps.is_finite()) {
            return Err(invalid(format!("velocity must be positive, got {}", self.velocity_mps)));
        }
        for (k, rsu) in net.rsus.iter().enumerate() {
            let (x, p, t_cm) = (self.residual_split[k], self.power_w[k], self.t_cm_s[k]);
            let (a, d) = (self.arrival_s[k], self.departure_s[k]);
            if !(0.0..=1.0).contains(&x) {
                return Err(invalid(format!("rsu {}: residual split {x} outside [0, 1]", k + 1)));
            }
            if a > d {
                return Err(invalid(format!("rsu {}: arrival {a} after departure {d}", k + 1)));
            }
            if p < 0.0 || p > rsu.p_max_w * (1.0 + AUDIT_TOL) {
                return Err(invalid(format!("rsu {}: power {p} outside [0, {}]", k + 1, rsu.p_max_w)));
            }
            if t_cm < 0.0 || t_cm > (d - a) + AUDIT_TOL * (1.0 + d.abs()) {
                return Err(invalid(format!("rsu {}: transmission time {t_cm} outside [0, {}]", k + 1, d - a)));
            }
            if x > 0.0 && a <= t_now {
                return Err(invalid(format!(
                    "rsu {}: unfinished split {x} but the vehicle arrived at {a} <= t = {t_now}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineInstance {
    pub net: NetworkConfig,
    pub t_now: f64,
    pub arrivals: Vec<VehicleSpec>,
    pub leftovers: Vec<LeftoverSpec>,
}

impl OnlineInstance {
    /// Validates the instance, including separation: at every RSU each
    /// leftover leaves the coverage before any new arrival enters it.
    pub fn validate(&self) -> Result<Timeline> {
        self.net.validate()?;
        if !(self.t_now >= 0.0 && self.t_now.is_finite()) {
            return Err(invalid(format!("decision time must be nonnegative, got {}", self.t_now)));
        }
        for (q, l) in self.leftovers.iter().enumerate() {
            l.validate(&self.net, self.t_now).map_err(|e| invalid(format!("leftovers[{q}]: {e}")))?;
        }
        let k_total = self.net.num_rsus();
        let timeline = if self.arrivals.is_empty() {
            Timeline::from_times(CellGrid::zeros(k_total, 0), CellGrid::zeros(k_total, 0))
        } else {
            build_timeline(&self.net, &self.arrivals)?
        };
        for k in 0..k_total {
            for (q, l) in self.leftovers.iter().enumerate() {
                for u in 0..self.arrivals.len() {
                    if l.departure_s[k] > timeline.arrival(k, u) {
                        return Err(invalid(format!(
                            "leftover {} and arrival {} overlap in RSU {}'s coverage",
                            q + 1,
                            u + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(timeline)
    }
}

/// Index map of the online program: the arrivals' block followed by
/// `(t̄_cp, s̄_cp)` for every leftover cell with work left.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLayout {
    pub arrivals: Problem2Layout,
    /// `(k, q)` of the leftover cells with a positive residual split.
    pub leftover_cells: Vec<(usize, usize)>,
}

impl OnlineLayout {
    pub fn t_cp_bar(&self, cell: usize) -> usize {
        self.arrivals.dim() + 2 * cell
    }

    pub fn s_cp_bar(&self, cell: usize) -> usize {
        self.arrivals.dim() + 2 * cell + 1
    }

    pub fn dim(&self) -> usize {
        self.arrivals.dim() + 2 * self.leftover_cells.len()
    }

    fn cell_of(&self, k: usize, q: usize) -> Option<usize> {
        self.leftover_cells.iter().position(|&c| c == (k, q))
    }
}

/// Leftovers at RSU `k` with work left, by arrival time, ties to the lower index.
fn leftover_order(leftovers: &[LeftoverSpec], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..leftovers.len()).filter(|&q| leftovers[q].residual_split[k] > 0.0).collect();
    order.sort_by(|&p, &q| leftovers[p].arrival_s[k].total_cmp(&leftovers[q].arrival_s[k]).then(p.cmp(&q)));
    order
}

/// Earliest completion of each RSU's leftover queue at full frequency.
fn check_leftover_deadlines(inst: &OnlineInstance) -> Result<()> {
    for (k, rsu) in inst.net.rsus.iter().enumerate() {
        let mut clock = inst.t_now;
        for q in leftover_order(&inst.leftovers, k) {
            let l = &inst.leftovers[q];
            clock += l.workload_cycles * l.residual_split[k] / rsu.f_max_hz;
            if clock > l.arrival_s[k] {
                return Err(OffloadError::Infeasible(format!(
                    "leftover {} cannot finish its remaining work at RSU {} before {} s even at the \
                     frequency cap (earliest finish {clock} s)",
                    q + 1,
                    k + 1,
                    l.arrival_s[k]
                )));
            }
        }
    }
    Ok(())
}

fn build(inst: &OnlineInstance, timeline: &Timeline) -> Result<(ConvexProgram<ScheduleObjective>, OnlineLayout)> {
    check_leftover_deadlines(inst)?;
    let mut asm = assemble(&inst.net, &inst.arrivals, timeline, inst.t_now)?;
    let base = asm.layout.clone();
    let leftover_cells: Vec<(usize, usize)> = (0..inst.net.num_rsus())
        .flat_map(|k| leftover_order(&inst.leftovers, k).into_iter().map(move |q| (k, q)))
        .collect();
    let layout = OnlineLayout { arrivals: base.clone(), leftover_cells };
    asm.program.objective.dim = layout.dim();

    for (cell, &(k, q)) in layout.leftover_cells.iter().enumerate() {
        let (rsu, l) = (&inst.net.rsus[k], &inst.leftovers[q]);
        let x = l.residual_split[k];
        let (t, s) = (layout.t_cp_bar(cell), layout.s_cp_bar(cell));
        asm.program.objective.terms.push(EnergyTerm::Compute {
            x: SplitRef::Fixed(x),
            t,
            coeff: rsu.kappa * l.workload_cycles.powf(rsu.epsilon),
            epsilon: rsu.epsilon,
        });
        asm.ineq(vec![(t, -1.0)], -l.workload_cycles * x / rsu.f_max_hz, RowKind::LeftoverFrequency, k, q);
        asm.ineq(vec![(s, -1.0)], -inst.t_now, RowKind::LeftoverStart, k, q);
        asm.ineq(vec![(s, 1.0), (t, 1.0)], l.arrival_s[k], RowKind::LeftoverDeadline, k, q);
    }
    for k in 0..inst.net.num_rsus() {
        let queue = leftover_order(&inst.leftovers, k);
        let cells: Vec<usize> = queue.iter().map(|&q| layout.cell_of(k, q).expect("queued cell")).collect();
        for (pair, qs) in cells.windows(2).zip(queue.windows(2)) {
            asm.ineq(
                vec![
                    (layout.s_cp_bar(pair[0]), 1.0),
                    (layout.t_cp_bar(pair[0]), 1.0),
                    (layout.s_cp_bar(pair[1]), -1.0),
                ],
                0.0,
                RowKind::LeftoverChain,
                k,
                qs[0],
            );
        }
        let first_arrival = timeline.ordering[k].iter().copied().find(|&u| !base.is_pinned(k, u));
        if let (Some(&last), Some(u)) = (cells.last(), first_arrival) {
            asm.ineq(
                vec![(layout.s_cp_bar(last), 1.0), (layout.t_cp_bar(last), 1.0), (base.s_cp(k, u), -1.0)],
                0.0,
                RowKind::LeftoverHandoff,
                k,
                *queue.last().expect("nonempty queue"),
            );
        }
    }
    Ok((asm.program, layout))
}

/// The online schedule program: arrivals as in the offline program with
/// `s_cp ≥ t`, plus leftover compute times `t̄_cp` (frequency `w̄ x̄ / t̄_cp`)
/// and starts `s̄_cp`. The leftovers' fixed transmission energy is a constant
/// and is left out of the objective.
pub fn build_problem6(inst: &OnlineInstance) -> Result<(ConvexProgram<ScheduleObjective>, OnlineLayout)> {
    let timeline = inst.validate()?;
    build(inst, &timeline)
}

/// Updated computation schedule of the leftovers, K×Q. The fixed fields are
/// copied from the input.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftoverSchedule {
    pub residual_split: CellGrid,
    pub f_hz: CellGrid,
    pub t_cp_s: CellGrid,
    pub s_cp_s: CellGrid,
    pub power_w: CellGrid,
    pub t_cm_s: CellGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineReport {
    pub arrivals: EnergyReport,
    pub leftover_cp_j: CellGrid,
    pub leftover_cm_j: CellGrid,
    /// Energy spent from `t` on: arrivals plus leftovers.
    pub total_j: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineSolution {
    pub allocation: Allocation,
    pub leftovers: LeftoverSchedule,
    pub report: OnlineReport,
    pub layout: OnlineLayout,
    pub timeline: Timeline,
    pub solve: Option<SolveResult>,
    /// Program objective at the cleaned decision vector plus the leftovers'
    /// transmission energy.
    pub program_objective_j: f64,
}

fn grid_of(leftovers: &[LeftoverSpec], k_total: usize, f: impl Fn(&LeftoverSpec, usize) -> f64) -> CellGrid {
    CellGrid::from_fn(k_total, leftovers.len(), |k, q| f(&leftovers[q], k))
}

/// Solves the online program with explicit solver settings.
pub fn solve_online_with(inst: &OnlineInstance, options: &SolverOptions) -> Result<OnlineSolution> {
    let timeline = inst.validate()?;
    let (program, layout) = build(inst, &timeline)?;
    let (k_total, q_total) = (inst.net.num_rsus(), inst.leftovers.len());
    let (z, result) = if layout.dim() == 0 {
        (Vec::new(), None)
    } else {
        let result = solve(&program, options)?;
        if result.status == SolveStatus::Infeasible {
            return Err(OffloadError::Infeasible(infeasibility_reason(&inst.net, &inst.arrivals, &timeline)));
        }
        if let Some(e) = status_error(&result) {
            return Err(e);
        }
        (result.z_star.clone(), Some(result))
    };
    let (allocation, mut clean) = recover_schedule(&inst.net, &inst.arrivals, &layout.arrivals, &z)?;
    clean.extend_from_slice(&z[layout.arrivals.dim()..]);

    let mut sched = LeftoverSchedule {
        residual_split: grid_of(&inst.leftovers, k_total, |l, k| l.residual_split[k]),
        f_hz: CellGrid::zeros(k_total, q_total),
        t_cp_s: CellGrid::zeros(k_total, q_total),
        s_cp_s: CellGrid::zeros(k_total, q_total),
        power_w: grid_of(&inst.leftovers, k_total, |l, k| l.power_w[k]),
        t_cm_s: grid_of(&inst.leftovers, k_total, |l, k| l.t_cm_s[k]),
    };
    for (cell, &(k, q)) in layout.leftover_cells.iter().enumerate() {
        let l = &inst.leftovers[q];
        let t = z[layout.t_cp_bar(cell)];
        sched.t_cp_s.set(k, q, t);
        sched.s_cp_s.set(k, q, z[layout.s_cp_bar(cell)]);
        sched.f_hz.set(k, q, l.workload_cycles * l.residual_split[k] / t);
    }

    let audit = check_online(inst, &timeline, &allocation, &sched);
    if audit.max_violation > AUDIT_TOL {
        return Err(OffloadError::NotConverged(format!(
            "recovered online schedule violates {} by {:.3e}",
            audit.worst, audit.max_violation
        )));
    }
    let arrivals = total_energy(&inst.net, &inst.arrivals, &allocation);
    let leftover_cp_j = CellGrid::from_fn(k_total, q_total, |k, q| {
        let rsu = &inst.net.rsus[k];
        let l = &inst.leftovers[q];
        comp_energy(rsu.kappa, rsu.epsilon, l.workload_cycles * l.residual_split[k], sched.f_hz.get(k, q))
    });
    let leftover_cm_j = CellGrid::from_fn(k_total, q_total, |k, q| sched.power_w.get(k, q) * sched.t_cm_s.get(k, q));
    let total_j = arrivals.total_j + leftover_cp_j.sum() + leftover_cm_j.sum();
    let program_objective_j = program.objective.value(&clean) + leftover_cm_j.sum();
    Ok(OnlineSolution {
        allocation,
        leftovers: sched,
        report: OnlineReport { arrivals, leftover_cp_j, leftover_cm_j, total_j },
        layout,
        timeline,
        solve: result,
        program_objective_j,
    })
}

/// Minimum-energy online schedule.
pub fn solve_online(inst: &OnlineInstance) -> Result<(Allocation, LeftoverSchedule, OnlineReport)> {
    let s = solve_online_with(inst, &schedule_solver_options())?;
    Ok((s.allocation, s.leftovers, s.report))
}

/// The state at time `t_now` of vehicles following an offline schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub leftovers: Vec<LeftoverSpec>,
    /// Computation energy already spent before `t_now`.
    pub executed_j: f64,
}

/// Turns an offline schedule into leftovers at `t_now`: computation runs at
/// constant frequency over `[s_cp, s_cp + t_cp]`, so the part finished by
/// `t_now` is removed from each split and its energy is reported as spent.
pub fn snapshot(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    alloc: &Allocation,
    t_now: f64,
) -> Snapshot {
    let k_total = net.num_rsus();
    let mut executed_j = 0.0;
    let leftovers = vehicles
        .iter()
        .enumerate()
        .map(|(u, v)| {
            let mut residual = vec![0.0; k_total];
            for (k, rsu) in net.rsus.iter().enumerate() {
                let x = alloc.x.get(k, u);
                if x == 0.0 {
                    continue;
                }
                let (s, t) = (alloc.s_cp_s.get(k, u), alloc.t_cp_s.get(k, u));
                let done = if t > 0.0 { ((t_now - s) / t).clamp(0.0, 1.0) } else { 1.0 };
                residual[k] = x * (1.0 - done);
                executed_j += comp_energy(rsu.kappa, rsu.epsilon, v.workload_cycles * x * done, alloc.f_hz.get(k, u));
            }
            LeftoverSpec {
                residual_split: residual,
                workload_cycles: v.workload_cycles,
                result_bits: v.result_bits,
                power_w: alloc.p_w.column(u),
                t_cm_s: alloc.t_cm_s.column(u),
                arrival_s: (0..k_total).map(|k| timeline.arrival(k, u)).collect(),
                departure_s: (0..k_total).map(|k| timeline.departure(k, u)).collect(),
                velocity_mps: v.velocity_mps,
            }
        })
        .collect();
    Snapshot { leftovers, executed_j }
}
