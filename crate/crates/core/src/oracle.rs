//! Independent checks used by tests and the `verify` command.
//!
//! Nothing here calls the solvers: the grid search and the constraint checker
//! only use the energy formulas and the timeline from [`crate::model`].

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::{
    comm_energy_time_form, comp_energy_time_form, gamma_ccdf, Allocation, NetworkConfig, RadioConstants, Timeline,
    VehicleSpec,
};
use crate::online::{LeftoverSchedule, OnlineInstance};
use crate::single::SingleVehicleInstance;

/// Simplex grid for [`grid_search_single`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    /// Largest number of RSUs accepted.
    pub max_dims: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { resolution: 1e-3, max_dims: 3 }
    }
}

/// Energy of a single-vehicle split with the whole compute window `[0, a_k]`
/// and the whole dwell used at every RSU.
fn single_split_energy(inst: &SingleVehicleInstance, x: &[f64]) -> Result<f64> {
    let v = &inst.vehicle;
    let mut total = 0.0;
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let rsu = &inst.net.rsus[k];
        total += comp_energy_time_form(rsu.kappa, rsu.epsilon, v.workload_cycles, xk, inst.arrival(k))?;
        total += comm_energy_time_form(&inst.net.radio, rsu.beta, v.stp_target, v.result_bits, xk, inst.dwell(k))?;
    }
    Ok(total)
}

/// Brute-force minimum over simplex points on a grid of the given
/// resolution, with each RSU's cap value added to its candidate set.
/// The last coordinate takes the remainder.
pub fn grid_search_single(inst: &SingleVehicleInstance, grid: &GridSpec) -> Result<(Vec<f64>, f64)> {
    let k_total = inst.rsus();
    if !(grid.resolution > 0.0 && grid.resolution <= 0.5) {
        return Err(invalid(format!("grid resolution must lie in (0, 0.5], got {}", grid.resolution)));
    }
    if k_total > grid.max_dims {
        return Err(invalid(format!("grid search limited to {} RSUs, got {k_total}", grid.max_dims)));
    }
    let caps = (0..k_total).map(|k| inst.caps(k).map(|c| c.value())).collect::<Result<Vec<_>>>()?;
    let steps = (1.0 / grid.resolution).round() as usize;
    let candidates: Vec<Vec<f64>> = caps
        .iter()
        .take(k_total - 1)
        .map(|&cap| {
            let mut c: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).filter(|&x| x <= cap).collect();
            if cap < 1.0 {
                c.push(cap);
            }
            c
        })
        .collect();
    let last_cap = caps[k_total - 1];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x = vec![0.0; k_total];
    let mut idx = vec![0usize; k_total.saturating_sub(1)];
    loop {
        let mut head = 0.0;
        for (j, &i) in idx.iter().enumerate() {
            x[j] = candidates[j][i];
            head += x[j];
        }
        let rest = 1.0 - head;
        if (-1e-12..=last_cap).contains(&rest) {
            x[k_total - 1] = rest.max(0.0);
            let e = single_split_energy(inst, &x)?;
            if best.as_ref().is_none_or(|b| e < b.1) {
                best = Some((x.clone(), e));
            }
        }
        // odometer over the candidate sets
        let mut j = 0;
        loop {
            if j == idx.len() {
                return best.ok_or_else(|| {
                    crate::error::OffloadError::Infeasible("no grid point satisfies the split caps".into())
                });
            }
            idx[j] += 1;
            if idx[j] < candidates[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// One constraint evaluation of [`check_problem1`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    /// RSU index, when the constraint belongs to one.
    pub k: Option<usize>,
    pub u: usize,
    /// Scaled violation; positive means violated.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub max_violation: f64,
    /// Label of the worst constraint, e.g. `compute-order (k=2, u=1)`, 1-based.
    pub worst: String,
    pub entries: Vec<Violation>,
}

impl ViolationReport {
    fn new() -> Self {
        Self { max_violation: f64::NEG_INFINITY, worst: String::new(), entries: Vec::new() }
    }

    fn record(&mut self, constraint: &'static str, k: Option<usize>, u: usize, amount: f64) {
        let amount = if amount.is_nan() { f64::INFINITY } else { amount };
        if amount > self.max_violation {
            self.max_violation = amount;
            self.worst = match k {
                Some(k) => format!("{constraint} (k={}, u={})", k + 1, u + 1),
                None => format!("{constraint} (u={})", u + 1),
            };
        }
        self.entries.push(Violation { constraint, k, u, amount });
    }

    /// Worst violation of one constraint family.
    pub fn max_of(&self, constraint: &str) -> f64 {
        self.entries.iter().filter(|e| e.constraint == constraint).map(|e| e.amount).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Computation time implied by the frequency, `w x / f`.
fn implied_t_cp(v: &VehicleSpec, x: f64, f: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if f > 0.0 {
        v.workload_cycles * x / f
    } else {
        f64::INFINITY
    }
}

/// Evaluates every schedule constraint for computation allowed from time 0.
pub fn check_problem1(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    alloc: &Allocation,
) -> ViolationReport {
    check_schedule_at(net, vehicles, timeline, alloc, 0.0)
}

/// Evaluates every schedule constraint with computation allowed from `t_now`.
///
/// Time rows are scaled by `1 + d` of the cell, caps by the cap, the split
/// sum and the STP margin are absolute. Order rows only involve cells with a
/// positive split: an idle server slot imposes nothing.
pub fn check_schedule_at(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    alloc: &Allocation,
    t_now: f64,
) -> ViolationReport {
    let mut rep = ViolationReport::new();
    let k_total = net.num_rsus();
    let radio = &net.radio;
    for (u, v) in vehicles.iter().enumerate() {
        rep.record("split-sum", None, u, (alloc.x.column_sum(u) - 1.0).abs());
        for (k, rsu) in net.rsus.iter().enumerate() {
            let x = alloc.x.get(k, u);
            let (f, p) = (alloc.f_hz.get(k, u), alloc.p_w.get(k, u));
            let (a, d) = (timeline.arrival(k, u), timeline.departure(k, u));
            let scale = 1.0 + d.abs();
            rep.record("split-range", Some(k), u, (-x).max(x - 1.0));
            rep.record("frequency-cap", Some(k), u, (f - rsu.f_max_hz).max(-f) / rsu.f_max_hz);
            rep.record("power-cap", Some(k), u, (p - rsu.p_max_w).max(-p) / rsu.p_max_w);
            if x == 0.0 {
                continue;
            }
            let t_cp = implied_t_cp(v, x, f);
            let (s_cp, s_cm, t_cm) = (alloc.s_cp_s.get(k, u), alloc.s_cm_s.get(k, u), alloc.t_cm_s.get(k, u));
            rep.record("compute-start", Some(k), u, (t_now - s_cp) / scale);
            rep.record("compute-deadline", Some(k), u, (s_cp + t_cp - a) / scale);
            rep.record("transmit-start", Some(k), u, (a - s_cm) / scale);
            rep.record("transmit-end", Some(k), u, (s_cm + t_cm - d) / scale);
            let stp = if t_cm > 0.0 && p > 0.0 {
                let need = (std::f64::consts::LN_2 * v.result_bits * x / (radio.bandwidth_hz * t_cm)).exp_m1();
                gamma_ccdf(radio.noise_w * need / (p * rsu.beta), radio.antennas)
            } else {
                0.0
            };
            rep.record("stp", Some(k), u, v.stp_target - stp);
        }
    }
    for k in 0..k_total {
        let busy: Vec<usize> = timeline.ordering[k].iter().copied().filter(|&u| alloc.x.get(k, u) > 0.0).collect();
        for pair in busy.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            let scale = 1.0 + timeline.departure(k, q).abs();
            let end_cp = alloc.s_cp_s.get(k, p) + implied_t_cp(&vehicles[p], alloc.x.get(k, p), alloc.f_hz.get(k, p));
            rep.record("compute-order", Some(k), p, (end_cp - alloc.s_cp_s.get(k, q)) / scale);
            let end_cm = alloc.s_cm_s.get(k, p) + alloc.t_cm_s.get(k, p);
            rep.record("transmit-order", Some(k), p, (end_cm - alloc.s_cm_s.get(k, q)) / scale);
        }
    }
    rep
}

/// Evaluates the arrivals' schedule constraints from `t_now` plus the
/// leftovers' rescheduled computation: frequency cap, start after `t_now`,
/// completion before the vehicle reaches the RSU, queue order by arrival and
/// the handoff to the first busy arrival. Leftover rows carry the leftover
/// index in `u`.
pub fn check_online(
    inst: &OnlineInstance,
    timeline: &Timeline,
    alloc: &Allocation,
    sched: &LeftoverSchedule,
) -> ViolationReport {
    let mut rep = check_schedule_at(&inst.net, &inst.arrivals, timeline, alloc, inst.t_now);
    for (k, rsu) in inst.net.rsus.iter().enumerate() {
        let mut queue: Vec<usize> =
            (0..inst.leftovers.len()).filter(|&q| inst.leftovers[q].residual_split[k] > 0.0).collect();
        queue.sort_by(|&p, &q| {
            inst.leftovers[p].arrival_s[k].total_cmp(&inst.leftovers[q].arrival_s[k]).then(p.cmp(&q))
        });
        let mut ends = Vec::with_capacity(queue.len());
        for &q in &queue {
            let l = &inst.leftovers[q];
            let (x, f) = (l.residual_split[k], sched.f_hz.get(k, q));
            let scale = 1.0 + l.departure_s[k].abs();
            let t_cp = if f > 0.0 { l.workload_cycles * x / f } else { f64::INFINITY };
            let start = sched.s_cp_s.get(k, q);
            rep.record("leftover-frequency-cap", Some(k), q, (f - rsu.f_max_hz) / rsu.f_max_hz);
            rep.record("leftover-start", Some(k), q, (inst.t_now - start) / scale);
            rep.record("leftover-deadline", Some(k), q, (start + t_cp - l.arrival_s[k]) / scale);
            ends.push((q, start + t_cp, scale));
        }
        for pair in ends.windows(2) {
            let ((prev, prev_end, _), (q, _, scale)) = (pair[0], pair[1]);
            rep.record("leftover-order", Some(k), prev, (prev_end - sched.s_cp_s.get(k, q)) / scale);
        }
        let first_busy = timeline.ordering[k].iter().copied().find(|&u| alloc.x.get(k, u) > 0.0);
        if let (Some(&(q, end, _)), Some(u)) = (ends.last(), first_busy) {
            let scale = 1.0 + timeline.departure(k, u).abs();
            rep.record("leftover-handoff", Some(k), q, (end - alloc.s_cp_s.get(k, u)) / scale);
        }
    }
    rep
}

/// Fraction of `samples` channel draws `‖h‖² ~ Gamma(N_t, 1)` for which
/// `B log2(1 + p ‖h‖² β / σ²) ≥ D x / t_cm`. Gamma draws are sums of `N_t`
/// unit exponentials from a ChaCha8 stream seeded with `seed`.
#[allow(clippy::too_many_arguments)]
pub fn stp_monte_carlo(
    radio: &RadioConstants,
    beta: f64,
    d_bits: f64,
    x: f64,
    t_cm_s: f64,
    p_w: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if p_w <= 0.0 || t_cm_s <= 0.0 || samples == 0 {
        return 0.0;
    }
    let need = (std::f64::consts::LN_2 * d_bits * x / (radio.bandwidth_hz * t_cm_s)).exp_m1();
    let threshold = radio.noise_w * need / (p_w * beta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let g: f64 = (0..radio.antennas).map(|_| -(1.0 - rng.gen::<f64>()).ln()).sum();
        if g >= threshold {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

/// Central-difference gradient.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, point: &[f64], step: f64) -> Vec<f64> {
    let mut z = point.to_vec();
    (0..point.len())
        .map(|i| {
            let h = step * (1.0 + point[i].abs());
            z[i] = point[i] + h;
            let up = f(&z);
            z[i] = point[i] - h;
            let down = f(&z);
            z[i] = point[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central difference of a gradient along `v`, approximating `∇²f(point) v`.
pub fn finite_diff_hessian_vec(grad: impl Fn(&[f64]) -> Vec<f64>, point: &[f64], v: &[f64], step: f64) -> Vec<f64> {
    let up: Vec<f64> = point.iter().zip(v).map(|(p, d)| p + step * d).collect();
    let down: Vec<f64> = point.iter().zip(v).map(|(p, d)| p - step * d).collect();
    grad(&up).iter().zip(grad(&down)).map(|(a, b)| (a - b) / (2.0 * step)).collect()
}
