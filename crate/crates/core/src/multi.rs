//! Offline multi-vehicle solver.
//!
//! Substituting the minimum STP power and `f = w x / t_cp` turns the schedule
//! problem into a smooth convex program in `(x, t_cp, t_cm, s_cp, s_cm)`
//! whose objective is a sum of perspective terms. The program is solved by
//! the barrier engine and mapped back to frequencies and powers.

use crate::convex::{solve, ConvexProgram, DenseMatrix, Objective, SolveResult, SolveStatus, SolverOptions};
use crate::error::{invalid, OffloadError, Result};
use crate::model::{
    build_timeline, gamma_ccdf_inv, optimal_power, rate_cap_factor, split_cap_first, total_energy, Allocation,
    EnergyReport, NetworkConfig, Timeline, VehicleSpec,
};
use crate::oracle::check_problem1;

/// Splits below this are returned as exact zeros.
pub const ZERO_SPLIT: f64 = 1e-9;
/// Lower bound on every time variable of an active cell.
pub const TIME_FLOOR_S: f64 = 1e-12;
/// Largest scaled constraint violation tolerated in a returned schedule.
pub const AUDIT_TOL: f64 = 1e-7;

/// Solver settings used for schedule programs: the engine defaults with a
/// tighter gap, so that optimal energies are resolved well below the margins
/// separating them from baseline schedules.
pub fn schedule_solver_options() -> SolverOptions {
    SolverOptions { duality_gap_tol: 1e-10, ..SolverOptions::default() }
}

/// A split entering an energy term: a decision variable or a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRef {
    Var(usize),
    Fixed(f64),
}

/// One perspective term of the schedule objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyTerm {
    /// `c x^ε t^(1−ε)` with `c = κ w^ε`.
    Compute { x: SplitRef, t: usize, coeff: f64, epsilon: f64 },
    /// `c t (2^(γ x / t) − 1)` with `c = σ²/(β G⁻¹(ρ))`, `γ = D/B`.
    Comm { x: usize, t: usize, coeff: f64, gamma: f64 },
}

/// Sum of [`EnergyTerm`]s over a flat decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleObjective {
    pub dim: usize,
    pub terms: Vec<EnergyTerm>,
}

fn split_value(x: SplitRef, z: &[f64]) -> f64 {
    match x {
        SplitRef::Var(i) => z[i],
        SplitRef::Fixed(v) => v,
    }
}

impl EnergyTerm {
    fn value(&self, z: &[f64]) -> f64 {
        match *self {
            EnergyTerm::Compute { x, t, coeff, epsilon } => {
                let (x, t) = (split_value(x, z), z[t]);
                if x == 0.0 {
                    return 0.0;
                }
                if x < 0.0 || t <= 0.0 {
                    return f64::INFINITY;
                }
                coeff * x * (x / t).powf(epsilon - 1.0)
            }
            EnergyTerm::Comm { x, t, coeff, gamma } => {
                let (x, t) = (z[x], z[t]);
                if x == 0.0 {
                    return 0.0;
                }
                if x < 0.0 || t <= 0.0 {
                    return f64::INFINITY;
                }
                coeff * t * (std::f64::consts::LN_2 * gamma * x / t).exp_m1()
            }
        }
    }
}

impl Objective for ScheduleObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        let mut sum = 0.0;
        for term in &self.terms {
            let v = term.value(z);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            sum += v;
        }
        sum
    }

    fn gradient(&self, z: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for term in &self.terms {
            match *term {
                EnergyTerm::Compute { x, t, coeff, epsilon } => {
                    let r = split_value(x, z) / z[t];
                    if let SplitRef::Var(i) = x {
                        grad[i] += coeff * epsilon * r.powf(epsilon - 1.0);
                    }
                    grad[t] += coeff * (1.0 - epsilon) * r.powf(epsilon);
                }
                EnergyTerm::Comm { x, t, coeff, gamma } => {
                    let ly = std::f64::consts::LN_2 * gamma * z[x] / z[t];
                    let e = ly.exp();
                    grad[x] += coeff * std::f64::consts::LN_2 * gamma * e;
                    grad[t] += coeff * (ly.exp_m1() - ly * e);
                }
            }
        }
    }

    fn add_hessian(&self, z: &[f64], scale: f64, hess: &mut DenseMatrix) {
        for term in &self.terms {
            match *term {
                EnergyTerm::Compute { x, t, coeff, epsilon } => {
                    let tv = z[t];
                    let r = split_value(x, z) / tv;
                    let c = scale * coeff * epsilon * (epsilon - 1.0) / tv;
                    hess.add(t, t, c * r.powf(epsilon));
                    if let SplitRef::Var(i) = x {
                        let cross = -c * r.powf(epsilon - 1.0);
                        hess.add(i, i, c * r.powf(epsilon - 2.0));
                        hess.add(i, t, cross);
                        hess.add(t, i, cross);
                    }
                }
                EnergyTerm::Comm { x, t, coeff, gamma } => {
                    let tv = z[t];
                    let y = gamma * z[x] / tv;
                    let l = std::f64::consts::LN_2;
                    let c = scale * coeff * l * l * (l * y).exp() / tv;
                    hess.add(x, x, c * gamma * gamma);
                    hess.add(x, t, -c * gamma * y);
                    hess.add(t, x, -c * gamma * y);
                    hess.add(t, t, c * y * y);
                }
            }
        }
    }
}

/// What a constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// `x ≥ 0`
    SplitNonneg,
    /// `Σ_k x_{k,u} = 1`
    SplitSum,
    /// `s_cp ≥ t_now`
    ComputeStart,
    /// `s_cp + t_cp ≤ a`
    ComputeDeadline,
    /// `x ≤ (f_max / w) t_cp`
    FrequencyCap,
    /// `s_cp,φ(m) + t_cp,φ(m) ≤ s_cp,φ(m+1)`
    ComputeChain,
    /// `s_cm ≥ a`
    TransmitStart,
    /// `s_cm + t_cm ≤ d`
    TransmitEnd,
    /// `D x / (B log2(1 + p_max β G⁻¹/σ²)) ≤ t_cm`
    RateCap,
    /// `s_cm,φ(m) + t_cm,φ(m) ≤ s_cm,φ(m+1)`
    TransmitChain,
    /// `t ≥ 1e-12 s` on `t_cp` and `t_cm`
    TimeFloor,
    /// A variable of an empty-window cell fixed to a constant.
    Pinned,
    /// `t̄_cp ≥ w̄ x̄ / f_max`
    LeftoverFrequency,
    /// `s̄_cp ≥ t_now`
    LeftoverStart,
    /// `s̄_cp + t̄_cp ≤ ā`
    LeftoverDeadline,
    /// Leftover compute queue order.
    LeftoverChain,
    /// The last leftover finishes before the first arrival starts.
    LeftoverHandoff,
}

/// Row provenance: kind plus RSU and vehicle (or queue position).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowTag {
    pub kind: RowKind,
    pub k: usize,
    pub u: usize,
}

/// Index map of the flat vector `(x, t_cp, t_cm, s_cp, s_cm)`, each block K×U
/// row-major, together with row tags.
///
/// Per active cell there are nine inequality rows (split sign, compute start,
/// compute deadline, frequency cap, transmit start, transmit end, rate cap and
/// two time floors), plus two chaining rows per consecutive pair in each
/// RSU's arrival order and one split-sum equality per vehicle: `9KU +
/// 2K(U−1)` inequalities and `U` equalities when every cell is active. Cells
/// whose compute window is empty are pinned by equalities instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem2Layout {
    pub rsus: usize,
    pub vehicles: usize,
    /// Cells with an empty compute window, forced to zero.
    pub pinned: Vec<(usize, usize)>,
    pub ineq_tags: Vec<RowTag>,
    pub eq_tags: Vec<RowTag>,
}

impl Problem2Layout {
    fn cell(&self, block: usize, k: usize, u: usize) -> usize {
        block * self.rsus * self.vehicles + k * self.vehicles + u
    }

    pub fn x(&self, k: usize, u: usize) -> usize {
        self.cell(0, k, u)
    }

    pub fn t_cp(&self, k: usize, u: usize) -> usize {
        self.cell(1, k, u)
    }

    pub fn t_cm(&self, k: usize, u: usize) -> usize {
        self.cell(2, k, u)
    }

    pub fn s_cp(&self, k: usize, u: usize) -> usize {
        self.cell(3, k, u)
    }

    pub fn s_cm(&self, k: usize, u: usize) -> usize {
        self.cell(4, k, u)
    }

    pub fn dim(&self) -> usize {
        5 * self.rsus * self.vehicles
    }

    pub fn is_pinned(&self, k: usize, u: usize) -> bool {
        self.pinned.contains(&(k, u))
    }

    /// Number of rows of each kind, inequalities and equalities together.
    pub fn count(&self, kind: RowKind) -> usize {
        self.ineq_tags.iter().chain(&self.eq_tags).filter(|t| t.kind == kind).count()
    }
}

/// Shared assembly for offline and online schedule programs.
pub(crate) struct Assembly {
    pub program: ConvexProgram<ScheduleObjective>,
    pub layout: Problem2Layout,
}

impl Assembly {
    pub fn ineq(&mut self, row: Vec<(usize, f64)>, rhs: f64, kind: RowKind, k: usize, u: usize) {
        self.program.ineq.push(row, rhs);
        self.layout.ineq_tags.push(RowTag { kind, k, u });
    }

    pub fn eq(&mut self, row: Vec<(usize, f64)>, rhs: f64, kind: RowKind, k: usize, u: usize) {
        self.program.eq.push(row, rhs);
        self.layout.eq_tags.push(RowTag { kind, k, u });
    }
}

/// Assembles the arrivals' block with computation allowed from `t_now` on.
pub(crate) fn assemble(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    t_now: f64,
) -> Result<Assembly> {
    let (k_total, u_total) = (net.num_rsus(), vehicles.len());
    if timeline.rsus() != k_total || timeline.vehicles() != u_total {
        return Err(invalid("timeline dimensions do not match the network and vehicles"));
    }
    let mut layout = Problem2Layout {
        rsus: k_total,
        vehicles: u_total,
        pinned: Vec::new(),
        ineq_tags: Vec::new(),
        eq_tags: Vec::new(),
    };
    for k in 0..k_total {
        for u in 0..u_total {
            if timeline.arrival(k, u) <= t_now {
                layout.pinned.push((k, u));
            }
        }
    }
    let dim = layout.dim();
    let objective = ScheduleObjective { dim, terms: Vec::new() };
    let mut asm = Assembly { program: ConvexProgram::new(objective), layout };
    let l = asm.layout.clone();
    let radio = &net.radio;

    for (u, v) in vehicles.iter().enumerate() {
        let ginv = gamma_ccdf_inv(v.stp_target, radio.antennas)?;
        for (k, rsu) in net.rsus.iter().enumerate() {
            let (a, d) = (timeline.arrival(k, u), timeline.departure(k, u));
            if l.is_pinned(k, u) {
                for (idx, val) in [(l.x(k, u), 0.0), (l.t_cp(k, u), 0.0), (l.t_cm(k, u), 0.0)] {
                    asm.eq(vec![(idx, 1.0)], val, RowKind::Pinned, k, u);
                }
                asm.eq(vec![(l.s_cp(k, u), 1.0)], t_now, RowKind::Pinned, k, u);
                asm.eq(vec![(l.s_cm(k, u), 1.0)], a, RowKind::Pinned, k, u);
                continue;
            }
            asm.program.objective.terms.push(EnergyTerm::Compute {
                x: SplitRef::Var(l.x(k, u)),
                t: l.t_cp(k, u),
                coeff: rsu.kappa * v.workload_cycles.powf(rsu.epsilon),
                epsilon: rsu.epsilon,
            });
            asm.program.objective.terms.push(EnergyTerm::Comm {
                x: l.x(k, u),
                t: l.t_cm(k, u),
                coeff: radio.noise_w / (rsu.beta * ginv),
                gamma: v.result_bits / radio.bandwidth_hz,
            });
            let factor = rate_cap_factor(radio, rsu.beta, rsu.p_max_w, v.stp_target)?;
            asm.ineq(vec![(l.x(k, u), -1.0)], 0.0, RowKind::SplitNonneg, k, u);
            asm.ineq(vec![(l.s_cp(k, u), -1.0)], -t_now, RowKind::ComputeStart, k, u);
            asm.ineq(vec![(l.s_cp(k, u), 1.0), (l.t_cp(k, u), 1.0)], a, RowKind::ComputeDeadline, k, u);
            asm.ineq(
                vec![(l.x(k, u), 1.0), (l.t_cp(k, u), -rsu.f_max_hz / v.workload_cycles)],
                0.0,
                RowKind::FrequencyCap,
                k,
                u,
            );
            asm.ineq(vec![(l.s_cm(k, u), -1.0)], -a, RowKind::TransmitStart, k, u);
            asm.ineq(vec![(l.s_cm(k, u), 1.0), (l.t_cm(k, u), 1.0)], d, RowKind::TransmitEnd, k, u);
            asm.ineq(
                vec![(l.x(k, u), v.result_bits / (radio.bandwidth_hz * factor)), (l.t_cm(k, u), -1.0)],
                0.0,
                RowKind::RateCap,
                k,
                u,
            );
            asm.ineq(vec![(l.t_cp(k, u), -1.0)], -TIME_FLOOR_S, RowKind::TimeFloor, k, u);
            asm.ineq(vec![(l.t_cm(k, u), -1.0)], -TIME_FLOOR_S, RowKind::TimeFloor, k, u);
        }
    }
    for k in 0..k_total {
        let order: Vec<usize> = timeline.ordering[k].iter().copied().filter(|&u| !l.is_pinned(k, u)).collect();
        for pair in order.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            asm.ineq(
                vec![(l.s_cp(k, p), 1.0), (l.t_cp(k, p), 1.0), (l.s_cp(k, q), -1.0)],
                0.0,
                RowKind::ComputeChain,
                k,
                p,
            );
            asm.ineq(
                vec![(l.s_cm(k, p), 1.0), (l.t_cm(k, p), 1.0), (l.s_cm(k, q), -1.0)],
                0.0,
                RowKind::TransmitChain,
                k,
                p,
            );
        }
    }
    for u in 0..u_total {
        asm.eq((0..k_total).map(|k| (l.x(k, u), 1.0)).collect(), 1.0, RowKind::SplitSum, 0, u);
    }
    Ok(asm)
}

/// The convex schedule program for `vehicles` on `net`.
pub fn build_problem2(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
) -> Result<(ConvexProgram<ScheduleObjective>, Problem2Layout)> {
    let asm = assemble(net, vehicles, timeline, 0.0)?;
    Ok((asm.program, asm.layout))
}

/// Maps a program solution back to a schedule: `f = w x / t_cp`, minimum STP
/// power over `t_cm`. Splits below [`ZERO_SPLIT`] become exact zeros along
/// with their frequency, power and durations. Returns the cleaned decision
/// vector too.
pub fn recover_schedule(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    layout: &Problem2Layout,
    z: &[f64],
) -> Result<(Allocation, Vec<f64>)> {
    let (k_total, u_total) = (layout.rsus, layout.vehicles);
    let mut alloc = Allocation::zeros(k_total, u_total);
    let mut clean = z[..layout.dim()].to_vec();
    for (u, v) in vehicles.iter().enumerate() {
        for k in 0..k_total {
            let x = z[layout.x(k, u)];
            alloc.s_cp_s.set(k, u, z[layout.s_cp(k, u)]);
            alloc.s_cm_s.set(k, u, z[layout.s_cm(k, u)]);
            if x < ZERO_SPLIT {
                for idx in [layout.x(k, u), layout.t_cp(k, u), layout.t_cm(k, u)] {
                    clean[idx] = 0.0;
                }
                continue;
            }
            let (t_cp, t_cm) = (z[layout.t_cp(k, u)], z[layout.t_cm(k, u)]);
            alloc.x.set(k, u, x);
            alloc.t_cp_s.set(k, u, t_cp);
            alloc.t_cm_s.set(k, u, t_cm);
            alloc.f_hz.set(k, u, v.workload_cycles * x / t_cp);
            let beta = net.rsus[k].beta;
            alloc.p_w.set(k, u, optimal_power(&net.radio, beta, v.stp_target, v.result_bits, x, t_cm)?);
        }
    }
    Ok((alloc, clean))
}

/// Why a multi-vehicle program has no interior.
pub(crate) fn infeasibility_reason(net: &NetworkConfig, vehicles: &[VehicleSpec], timeline: &Timeline) -> String {
    for u in 0..vehicles.len() {
        let caps: Vec<_> =
            (0..net.num_rsus()).filter_map(|k| split_cap_first(net, vehicles, timeline, k, u).ok()).collect();
        let total: f64 = caps.iter().map(|c| c.value()).sum();
        if total < 1.0 {
            let freq = caps.iter().filter(|c| c.binding() == "frequency").count();
            return format!(
                "vehicle {}: split caps sum to {total:.6} < 1 (frequency cap binds at {freq} RSUs, \
                 transmit-power cap at {})",
                u + 1,
                caps.len() - freq
            );
        }
    }
    "the vehicles' shared compute and transmission windows cannot fit every task \
     (frequency and transmit-power caps under sequential RSU access)"
        .to_string()
}

/// Everything produced by a multi-vehicle solve.
#[derive(Debug, Clone)]
pub struct MultiSolution {
    pub allocation: Allocation,
    pub report: EnergyReport,
    pub layout: Problem2Layout,
    pub solve: SolveResult,
    /// Program objective at the cleaned decision vector.
    pub program_objective_j: f64,
}

pub(crate) fn status_error(result: &SolveResult) -> Option<OffloadError> {
    match result.status {
        SolveStatus::Optimal => None,
        SolveStatus::Infeasible => Some(OffloadError::Infeasible("no strictly feasible schedule".into())),
        SolveStatus::MaxIterations => Some(OffloadError::NotConverged(format!(
            "barrier solver stopped with residuals {:?}",
            result.kkt_residuals
        ))),
    }
}

/// Solves the multi-vehicle program with explicit solver settings.
pub fn solve_multi_with(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    options: &SolverOptions,
) -> Result<MultiSolution> {
    let timeline = build_timeline(net, vehicles)?;
    let (program, layout) = build_problem2(net, vehicles, &timeline)?;
    let result = solve(&program, options)?;
    if result.status == SolveStatus::Infeasible {
        return Err(OffloadError::Infeasible(infeasibility_reason(net, vehicles, &timeline)));
    }
    if let Some(e) = status_error(&result) {
        return Err(e);
    }
    let (allocation, clean) = recover_schedule(net, vehicles, &layout, &result.z_star)?;
    let report = total_energy(net, vehicles, &allocation);
    let audit = check_problem1(net, vehicles, &timeline, &allocation);
    if audit.max_violation > AUDIT_TOL {
        return Err(OffloadError::NotConverged(format!(
            "recovered schedule violates {} by {:.3e}",
            audit.worst, audit.max_violation
        )));
    }
    let program_objective_j = program.objective.value(&clean);
    Ok(MultiSolution { allocation, report, layout, solve: result, program_objective_j })
}

/// Minimum-energy schedule for several vehicles.
pub fn solve_multi(net: &NetworkConfig, vehicles: &[VehicleSpec]) -> Result<(Allocation, EnergyReport)> {
    let s = solve_multi_with(net, vehicles, &schedule_solver_options())?;
    Ok((s.allocation, s.report))
}
