//! Offline single-vehicle solver.
//!
//! With one vehicle the optimal schedule computes everything before the
//! vehicle arrives (`s_cp = 0`, `t_cp = a_k`) and transmits over the whole
//! dwell (`s_cm = a_k`, `t_cm = d_k − a_k`). What remains is the split, whose
//! optimality condition `h_k(x_k) = ν` on uncapped coordinates is solved by a
//! bisection on `ν` wrapped around a bisection for `h_k⁻¹`.

use crate::error::{invalid, OffloadError, Result};
use crate::model::{
    build_timeline, gamma_ccdf_inv, optimal_power, split_cap_first, total_energy, Allocation, EnergyReport,
    NetworkConfig, SplitCaps, Timeline, VehicleSpec,
};

const INNER_MAX_ITERS: usize = 400;
const OUTER_MAX_ITERS: usize = 2000;
/// Bisection stops once the split sums to one within this.
const SUM_TARGET: f64 = 1e-13;
/// Largest unit-sum error accepted when bisection stalls first.
const SUM_TOL: f64 = 1e-9;

/// One vehicle on a network, with its timeline and the STP constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleVehicleInstance {
    pub net: NetworkConfig,
    pub vehicle: VehicleSpec,
    pub timeline: Timeline,
    ginv: f64,
}

impl SingleVehicleInstance {
    pub fn new(net: NetworkConfig, vehicle: VehicleSpec) -> Result<Self> {
        for (k, rsu) in net.rsus.iter().enumerate() {
            if rsu.epsilon < 2.0 {
                return Err(invalid(format!(
                    "rsus[{k}]: the single-vehicle solver needs epsilon >= 2, got {}",
                    rsu.epsilon
                )));
            }
        }
        let timeline = build_timeline(&net, std::slice::from_ref(&vehicle))?;
        let ginv = gamma_ccdf_inv(vehicle.stp_target, net.radio.antennas)?;
        Ok(Self { net, vehicle, timeline, ginv })
    }

    pub fn rsus(&self) -> usize {
        self.net.num_rsus()
    }

    pub fn arrival(&self, k: usize) -> f64 {
        self.timeline.arrival(k, 0)
    }

    pub fn dwell(&self, k: usize) -> f64 {
        self.timeline.dwell(k, 0)
    }

    pub fn caps(&self, k: usize) -> Result<SplitCaps> {
        split_cap_first(&self.net, std::slice::from_ref(&self.vehicle), &self.timeline, k, 0)
    }

    /// `D σ² ln2 / (β B G⁻¹(ρ))`, the communication factor of `h_k`.
    fn comm_coeff(&self, k: usize) -> f64 {
        let radio = &self.net.radio;
        self.vehicle.result_bits * radio.noise_w * std::f64::consts::LN_2
            / (self.net.rsus[k].beta * radio.bandwidth_hz * self.ginv)
    }
}

/// Multiplier of the unit-sum constraint on the split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktMultiplier {
    pub nu: f64,
}

/// Which algorithm produced a master solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterPath {
    General,
    Homogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub x: Vec<f64>,
    pub nu: KktMultiplier,
    /// `min(frequency cap, rate cap)` per RSU.
    pub caps: Vec<f64>,
    pub path: MasterPath,
}

/// Marginal energy of RSU k's share:
/// `ε κ w^ε a^(1−ε) x^(ε−1) + D σ² ln2/(β B G⁻¹) · 2^(D x/(B (d−a)))`.
///
/// Infinite for `x > 0` when the compute window is empty.
pub fn h_k(inst: &SingleVehicleInstance, k: usize, x: f64) -> f64 {
    let rsu = &inst.net.rsus[k];
    let w = inst.vehicle.workload_cycles;
    let a = inst.arrival(k);
    let compute = if x == 0.0 {
        0.0
    } else if a == 0.0 {
        f64::INFINITY
    } else {
        rsu.epsilon * rsu.kappa * w * (w * x / a).powf(rsu.epsilon - 1.0)
    };
    let exponent = inst.vehicle.result_bits * x / (inst.net.radio.bandwidth_hz * inst.dwell(k));
    compute + inst.comm_coeff(k) * exponent.exp2()
}

/// Inverse of an increasing `h` on `[0, ∞)`, clamped to 0 below `h(0)`.
fn invert_increasing(h: impl Fn(f64) -> f64, nu: f64) -> f64 {
    if !(nu > h(0.0)) {
        return 0.0;
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while h(hi) < nu {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    for _ in 0..INNER_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if (v - nu).abs() <= 1e-13 * nu {
            return mid;
        }
        if v < nu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (h(lo) - nu).abs() <= (h(hi) - nu).abs() {
        lo
    } else {
        hi
    }
}

/// `h_k⁻¹(ν)`, or 0 when `ν ≤ h_k(0)`.
pub fn h_k_inv(inst: &SingleVehicleInstance, k: usize, nu: f64) -> f64 {
    invert_increasing(|x| h_k(inst, k, x), nu)
}

/// Finds `ν` with `Σ_k x_k(ν) = 1` for nondecreasing `x_k(ν)`.
///
/// `lo` must give a sum at most 1 and `hi` a sum at least 1. Bisection runs
/// in log space.
fn bisect_nu(split: impl Fn(f64) -> Vec<f64>, mut lo: f64, mut hi: f64) -> Result<(f64, Vec<f64>)> {
    let sum = |x: &[f64]| x.iter().sum::<f64>();
    let x_hi = split(hi);
    if (sum(&x_hi) - 1.0).abs() <= SUM_TARGET {
        return Ok((hi, x_hi));
    }
    let mut best = (hi, x_hi);
    for _ in 0..OUTER_MAX_ITERS {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let x = split(mid);
        let s = sum(&x);
        if (s - 1.0).abs() < (sum(&best.1) - 1.0).abs() {
            best = (mid, x.clone());
        }
        if (s - 1.0).abs() <= SUM_TARGET {
            return Ok((mid, x));
        }
        if s < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = sum(&best.1);
    if (s - 1.0).abs() <= SUM_TOL {
        Ok(best)
    } else {
        Err(OffloadError::NotConverged(format!("split bisection stalled with sum {s}")))
    }
}

fn infeasible_caps(inst: &SingleVehicleInstance, caps: &[SplitCaps]) -> OffloadError {
    let total: f64 = caps.iter().map(|c| c.value()).sum();
    let freq = caps.iter().filter(|c| c.binding() == "frequency").count();
    OffloadError::Infeasible(format!(
        "split caps sum to {total:.6} < 1 over {} RSUs (frequency cap binds at {freq}, transmit-power cap at {})",
        inst.rsus(),
        caps.len() - freq
    ))
}

/// Optimal split with every cap `min(f_max a_k/w, rate cap)` enforced.
pub fn solve_master(inst: &SingleVehicleInstance) -> Result<MasterSolution> {
    let k_total = inst.rsus();
    let split_caps = (0..k_total).map(|k| inst.caps(k)).collect::<Result<Vec<_>>>()?;
    let caps: Vec<f64> = split_caps.iter().map(|c| c.value()).collect();
    if caps.iter().sum::<f64>() < 1.0 {
        return Err(infeasible_caps(inst, &split_caps));
    }
    let active: Vec<usize> = (0..k_total).filter(|&k| caps[k] > 0.0).collect();
    let lo = active.iter().map(|&k| h_k(inst, k, 0.0)).fold(f64::INFINITY, f64::min);
    let hi = active.iter().map(|&k| h_k(inst, k, caps[k].min(1.0))).fold(0.0, f64::max);
    let split = |nu: f64| -> Vec<f64> {
        (0..k_total).map(|k| if caps[k] > 0.0 { h_k_inv(inst, k, nu).min(caps[k]) } else { 0.0 }).collect()
    };
    let (nu, x) = bisect_nu(split, lo, hi)?;
    Ok(MasterSolution { x, nu: KktMultiplier { nu }, caps, path: MasterPath::General })
}

/// The homogeneous `h̃_k`: `h_k` with `a_k = (d⁰ + (k−1) l)/v` and `d_k − a_k = l/v`.
fn h_tilde(inst: &SingleVehicleInstance, k: usize, x: f64) -> f64 {
    let rsu = &inst.net.rsus[0];
    let v = &inst.vehicle;
    let (eps, w) = (rsu.epsilon, v.workload_cycles);
    let reach = v.initial_distance_m + k as f64 * rsu.coverage_m;
    let compute = if x == 0.0 {
        0.0
    } else if reach == 0.0 {
        f64::INFINITY
    } else {
        eps * rsu.kappa * w.powf(eps) * (v.velocity_mps / reach).powf(eps - 1.0) * x.powf(eps - 1.0)
    };
    let exponent = v.result_bits * v.velocity_mps * x / (inst.net.radio.bandwidth_hz * rsu.coverage_m);
    compute + inst.comm_coeff(0) * exponent.exp2()
}

/// Closed-form path for identical RSUs: solves `Σ_k max{h̃_k⁻¹(ν), 0} = 1`
/// without caps, then checks the caps at the candidate. Falls back to
/// [`solve_master`] when the network is not homogeneous or a cap binds.
pub fn solve_master_homogeneous(inst: &SingleVehicleInstance) -> Result<MasterSolution> {
    if !inst.net.is_homogeneous() {
        return solve_master(inst);
    }
    let k_total = inst.rsus();
    let open: Vec<usize> = (0..k_total).filter(|&k| inst.arrival(k) > 0.0).collect();
    if open.is_empty() {
        return solve_master(inst);
    }
    let lo = open.iter().map(|&k| h_tilde(inst, k, 0.0)).fold(f64::INFINITY, f64::min);
    let hi = open.iter().map(|&k| h_tilde(inst, k, 1.0)).fold(0.0, f64::max);
    let split =
        |nu: f64| -> Vec<f64> { (0..k_total).map(|k| invert_increasing(|x| h_tilde(inst, k, x), nu)).collect() };
    let (nu, x) = bisect_nu(split, lo, hi)?;
    let caps = (0..k_total).map(|k| inst.caps(k).map(|c| c.value())).collect::<Result<Vec<_>>>()?;
    if x.iter().zip(&caps).any(|(xi, c)| *xi > *c) {
        return solve_master(inst);
    }
    Ok(MasterSolution { x, nu: KktMultiplier { nu }, caps, path: MasterPath::Homogeneous })
}

/// Full schedule for a split: `f = w x/a`, `s_cp = 0`, `s_cm = a`, transmission
/// over the whole dwell at the minimum power meeting the STP target.
pub fn recover_allocation(inst: &SingleVehicleInstance, x: &[f64]) -> Result<Allocation> {
    let k_total = inst.rsus();
    if x.len() != k_total {
        return Err(invalid(format!("split has {} entries, expected {k_total}", x.len())));
    }
    let v = &inst.vehicle;
    let mut alloc = Allocation::zeros(k_total, 1);
    for (k, &xk) in x.iter().enumerate() {
        let a = inst.arrival(k);
        alloc.s_cm_s.set(k, 0, a);
        if xk == 0.0 {
            continue;
        }
        let window = inst.dwell(k);
        alloc.x.set(k, 0, xk);
        alloc.t_cp_s.set(k, 0, a);
        if a <= 0.0 {
            return Err(OffloadError::InfeasibleInput(format!("RSU {} has no compute window", k + 1)));
        }
        alloc.f_hz.set(k, 0, v.workload_cycles * xk / a);
        alloc.t_cm_s.set(k, 0, window);
        let p = optimal_power(&inst.net.radio, inst.net.rsus[k].beta, v.stp_target, v.result_bits, xk, window)?;
        alloc.p_w.set(k, 0, p);
    }
    Ok(alloc)
}

/// Optimal single-vehicle schedule and its energy.
pub fn solve_single(inst: &SingleVehicleInstance) -> Result<(Allocation, EnergyReport)> {
    let master = solve_master(inst)?;
    let alloc = recover_allocation(inst, &master.x)?;
    let report = total_energy(&inst.net, std::slice::from_ref(&inst.vehicle), &alloc);
    Ok((alloc, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RadioConstants, RsuConfig};

    fn rsu() -> RsuConfig {
        RsuConfig {
            coverage_m: 500.0,
            max_link_m: 250.0,
            beta: 1e-8,
            p_max_w: 100.0,
            f_max_hz: 1e12,
            kappa: 1e-11,
            epsilon: 3.0,
        }
    }

    fn hand_fixture(k_total: usize) -> SingleVehicleInstance {
        let net =
            NetworkConfig::new(vec![rsu(); k_total], RadioConstants { bandwidth_hz: 5e6, noise_w: 1e-11, antennas: 1 })
                .unwrap();
        let v = VehicleSpec {
            velocity_mps: 25.0,
            initial_distance_m: 300.0,
            workload_cycles: 1e9,
            result_bits: 1e6,
            stp_target: 0.95,
        };
        SingleVehicleInstance::new(net, v).unwrap()
    }

    #[test]
    fn h_hand_values() {
        let inst = hand_fixture(2);
        // mpmath references
        let h0 = 0.002_702_681_466_792_977;
        assert!((h_k(&inst, 0, 0.0) - h0).abs() < 1e-15);
        let h_half = h_k(&inst, 0, 0.5);
        assert!((h_half - 52_083_333_333_333.336).abs() / h_half < 1e-13);
        let h_one = h_k(&inst, 0, 1.0);
        assert!((h_one - 208_333_333_333_333.34).abs() / h_one < 1e-13);
    }

    #[test]
    fn h_inverse_round_trip_and_clamp() {
        let inst = hand_fixture(2);
        for x in [0.5, 1.0, 1e-4, 0.123] {
            let back = h_k_inv(&inst, 0, h_k(&inst, 0, x));
            assert!((back - x).abs() < 1e-10, "{x} -> {back}");
        }
        assert_eq!(h_k_inv(&inst, 0, 0.5 * h_k(&inst, 0, 0.0)), 0.0);
    }

    #[test]
    fn one_rsu_takes_everything() {
        let inst = hand_fixture(1);
        let m = solve_master(&inst).unwrap();
        assert!((m.x[0] - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn later_rsu_gets_more() {
        // a_1 = 12 s, a_2 = 32 s
        let inst = hand_fixture(2);
        let m = solve_master(&inst).unwrap();
        assert!(m.x[1] > m.x[0]);
        assert!((m.x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for k in 0..2 {
            assert!((h_k(&inst, k, m.x[k]) - m.nu.nu).abs() <= 1e-8 * m.nu.nu);
        }
    }

    #[test]
    fn recovered_power_hand_value() {
        let inst = hand_fixture(2);
        let alloc = recover_allocation(&inst, &[0.5, 0.5]).unwrap();
        assert!((alloc.p_w.get(0, 0) - 6.768_425_680_112_72e-5).abs() < 1e-17);
        assert_eq!(alloc.f_hz.get(0, 0), 1e9 * 0.5 / 12.0);
        assert_eq!(alloc.t_cm_s.get(0, 0), 20.0);
        let alloc = recover_allocation(&inst, &[1.0, 0.0]).unwrap();
        assert_eq!((alloc.f_hz.get(1, 0), alloc.p_w.get(1, 0), alloc.t_cm_s.get(1, 0)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn infeasible_when_caps_fall_short() {
        let mut inst = hand_fixture(2);
        for r in &mut inst.net.rsus {
            r.f_max_hz = 1e7;
        }
        match solve_master(&inst) {
            Err(OffloadError::Infeasible(msg)) => assert!(msg.contains("frequency")),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn homogeneous_matches_general() {
        let inst = hand_fixture(4);
        let a = solve_master(&inst).unwrap();
        let b = solve_master_homogeneous(&inst).unwrap();
        assert_eq!(b.path, MasterPath::Homogeneous);
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn homogeneous_falls_back_when_cap_binds() {
        let mut inst = hand_fixture(3);
        // RSU 3 alone would take the largest share; starve its CPU
        inst.net.rsus[2].f_max_hz = 1e7;
        let b = solve_master_homogeneous(&inst).unwrap();
        assert_eq!(b.path, MasterPath::General);
        assert_eq!(b, solve_master(&inst).unwrap());
    }

    #[test]
    fn rejects_small_epsilon() {
        let inst = hand_fixture(1);
        let mut net = inst.net.clone();
        net.rsus[0].epsilon = 1.5;
        assert!(SingleVehicleInstance::new(net, inst.vehicle).is_err());
    }
}
