use super::gamma::gamma_ccdf_inv;
use super::{Allocation, CellGrid, EnergyReport, NetworkConfig, RadioConstants, Timeline, VehicleSpec};
use crate::error::{OffloadError, Result};

/// DVFS computation energy `κ·(w x)·f^(ε−1)`; zero when either the workload
/// share or the frequency is zero.
pub fn comp_energy(kappa: f64, epsilon: f64, workload_share_cycles: f64, f_hz: f64) -> f64 {
    if workload_share_cycles == 0.0 || f_hz == 0.0 {
        return 0.0;
    }
    kappa * workload_share_cycles * f_hz.powf(epsilon - 1.0)
}

/// Computation energy in terms of the computation time, `κ wᵉ xᵉ t^(1−ε)`.
///
/// Evaluated as `κ (w x) (w x / t)^(ε−1)`, i.e. with the frequency that finishes
/// the share exactly in `t`. The perspective limit at `x = 0` is zero.
pub fn comp_energy_time_form(kappa: f64, epsilon: f64, w_cycles: f64, x: f64, t_cp_s: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    if t_cp_s <= 0.0 {
        return Err(OffloadError::InfeasibleInput(format!(
            "split {x} needs a positive computation time, got {t_cp_s}"
        )));
    }
    let share = w_cycles * x;
    Ok(comp_energy(kappa, epsilon, share, share / t_cp_s))
}

/// `σ² / (β G⁻¹(ρ))`, the power scale of the STP-constrained link.
fn power_scale(radio: &RadioConstants, beta: f64, rho: f64) -> Result<f64> {
    Ok(radio.noise_w / (beta * gamma_ccdf_inv(rho, radio.antennas)?))
}

/// Minimum transmit power meeting the STP target when `D x` bits are sent in
/// `t_cm` seconds: `σ²/(β G⁻¹(ρ)) · (2^(D x/(B t)) − 1)`.
pub fn optimal_power(radio: &RadioConstants, beta: f64, rho: f64, d_bits: f64, x: f64, t_cm_s: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    if t_cm_s <= 0.0 {
        return Err(OffloadError::InfeasibleInput(format!(
            "split {x} needs a positive transmission time, got {t_cm_s}"
        )));
    }
    let exponent = d_bits * x / (radio.bandwidth_hz * t_cm_s);
    Ok(power_scale(radio, beta, rho)? * (exponent * std::f64::consts::LN_2).exp_m1())
}

/// Communication energy at the optimal power, `p*(x, t)·t`.
pub fn comm_energy_time_form(
    radio: &RadioConstants,
    beta: f64,
    rho: f64,
    d_bits: f64,
    x: f64,
    t_cm_s: f64,
) -> Result<f64> {
    Ok(optimal_power(radio, beta, rho, d_bits, x, t_cm_s)? * t_cm_s)
}

/// `log2(1 + p_max β G⁻¹(ρ) / σ²)`: bits per hertz-second sustainable at full power.
pub fn rate_cap_factor(radio: &RadioConstants, beta: f64, p_max_w: f64, rho: f64) -> Result<f64> {
    Ok((p_max_w / power_scale(radio, beta, rho)?).ln_1p() / std::f64::consts::LN_2)
}

/// The two limits on the split an RSU can take for one vehicle, given a
/// compute window and a transmission window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCaps {
    /// `f_max · compute_window / w`.
    pub frequency: f64,
    /// `B · transmit_window / D · log2(1 + p_max β G⁻¹(ρ)/σ²)`.
    pub rate: f64,
}

impl SplitCaps {
    pub(crate) fn compute(
        net: &NetworkConfig,
        vehicle: &VehicleSpec,
        k: usize,
        compute_window_s: f64,
        transmit_window_s: f64,
    ) -> Result<Self> {
        let rsu = &net.rsus[k];
        let factor = rate_cap_factor(&net.radio, rsu.beta, rsu.p_max_w, vehicle.stp_target)?;
        Ok(Self {
            frequency: rsu.f_max_hz * compute_window_s.max(0.0) / vehicle.workload_cycles,
            rate: net.radio.bandwidth_hz * transmit_window_s.max(0.0) / vehicle.result_bits * factor,
        })
    }

    pub fn value(&self) -> f64 {
        self.frequency.min(self.rate)
    }

    /// Which of the two limits binds, for diagnostics.
    pub fn binding(&self) -> &'static str {
        if self.frequency <= self.rate {
            "frequency"
        } else {
            "transmit-power"
        }
    }
}

/// Largest split RSU `k` can take for vehicle `u` when `u` has the RSU to
/// itself: compute window `[0, a]`, transmission window `[a, d]`.
pub fn split_cap_first(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    k: usize,
    u: usize,
) -> Result<SplitCaps> {
    SplitCaps::compute(net, &vehicles[u], k, timeline.arrival(k, u), timeline.dwell(k, u))
}

/// Largest split RSU `k` can take for the second-arriving of two vehicles
/// when the first one uses its full windows: compute window
/// `a_{φ2} − a_{φ1}`, transmission window `max{0, d_{φ2} − max(a_{φ2}, d_{φ1})}`.
pub fn split_cap_second(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    k: usize,
) -> Result<SplitCaps> {
    let order = &timeline.ordering[k];
    if order.len() != 2 {
        return Err(OffloadError::InvalidInput(format!(
            "split_cap_second needs exactly two vehicles, got {}",
            order.len()
        )));
    }
    let (first, second) = (order[0], order[1]);
    let compute = timeline.arrival(k, second) - timeline.arrival(k, first);
    let start = timeline.arrival(k, second).max(timeline.departure(k, first));
    let transmit = (timeline.departure(k, second) - start).max(0.0);
    SplitCaps::compute(net, &vehicles[second], k, compute, transmit)
}

/// Energy of an allocation: `Σ κ w x f^(ε−1) + p t_cm` over every cell.
pub fn total_energy(net: &NetworkConfig, vehicles: &[VehicleSpec], alloc: &Allocation) -> EnergyReport {
    let (k_total, u_total) = (alloc.rsus(), alloc.vehicles());
    debug_assert_eq!(k_total, net.num_rsus());
    debug_assert_eq!(u_total, vehicles.len());
    let e_cp = CellGrid::from_fn(k_total, u_total, |k, u| {
        let rsu = &net.rsus[k];
        comp_energy(rsu.kappa, rsu.epsilon, vehicles[u].workload_cycles * alloc.x.get(k, u), alloc.f_hz.get(k, u))
    });
    let e_cm = CellGrid::from_fn(k_total, u_total, |k, u| alloc.p_w.get(k, u) * alloc.t_cm_s.get(k, u));
    let total_j = e_cp.sum() + e_cm.sum();
    EnergyReport { e_cp_j: e_cp, e_cm_j: e_cm, total_j }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_timeline, RsuConfig};

    const COMM_EXAMPLE_J: f64 = 0.002_898_982_347_936_805;

    fn radio1() -> RadioConstants {
        RadioConstants { bandwidth_hz: 5e6, noise_w: 1e-11, antennas: 1 }
    }

    #[test]
    fn comp_energy_examples() {
        assert!((comp_energy(1e-11, 3.0, 1e6, 100.0) - 0.1).abs() < 1e-15);
        assert_eq!(comp_energy(1e-11, 3.0, 0.0, 100.0), 0.0);
        assert!((comp_energy(1e-11, 2.0, 1e6, 100.0) - 1e-3).abs() < 1e-17);
    }

    #[test]
    fn comp_time_form_examples() {
        let e = comp_energy_time_form(1e-11, 3.0, 1e6, 1.0, 1e4).unwrap();
        assert!((e - 0.1).abs() < 1e-15);
        assert_eq!(comp_energy_time_form(1e-11, 3.0, 1e6, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(comp_energy_time_form(1e-11, 3.0, 1e6, 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(comp_energy_time_form(1e-11, 3.0, 1e6, 0.2, 0.0), Err(OffloadError::InfeasibleInput(_))));
    }

    #[test]
    fn comm_energy_example() {
        let e = comm_energy_time_form(&radio1(), 1e-8, 0.95, 1e6, 1.0, 1.0).unwrap();
        assert!((e - COMM_EXAMPLE_J).abs() < 1e-15, "{e}");
        let p = optimal_power(&radio1(), 1e-8, 0.95, 1e6, 1.0, 1.0).unwrap();
        assert!((p - COMM_EXAMPLE_J).abs() < 1e-15);
        assert_eq!(comm_energy_time_form(&radio1(), 1e-8, 0.95, 1e6, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(optimal_power(&radio1(), 1e-8, 0.95, 1e6, 0.0, 0.0).unwrap(), 0.0);
        assert!(optimal_power(&radio1(), 1e-8, 0.95, 1e6, 0.5, 0.0).is_err());
        assert!(comm_energy_time_form(&radio1(), 1e-8, 0.95, 1e6, 0.5, 0.0).is_err());
    }

    #[test]
    fn rate_factor_inverts_power() {
        // transmitting at p_max over the capped share needs exactly p_max
        let radio = radio1();
        let factor = rate_cap_factor(&radio, 1e-8, 2.0, 0.95).unwrap();
        let t = 3.0;
        let x = radio.bandwidth_hz * t / 1e6 * factor;
        let p = optimal_power(&radio, 1e-8, 0.95, 1e6, x, t).unwrap();
        assert!((p - 2.0).abs() < 1e-12);
    }

    fn fixture() -> (NetworkConfig, Vec<VehicleSpec>) {
        let rsu = RsuConfig {
            coverage_m: 500.0,
            max_link_m: 250.0,
            beta: 1e-8,
            p_max_w: 100.0,
            f_max_hz: 1e9,
            kappa: 1e-11,
            epsilon: 3.0,
        };
        let net = NetworkConfig::new(vec![rsu; 2], radio1()).unwrap();
        let v = VehicleSpec {
            velocity_mps: 25.0,
            initial_distance_m: 300.0,
            workload_cycles: 4e10,
            result_bits: 1e9,
            stp_target: 0.95,
        };
        (net, vec![v])
    }

    #[test]
    fn cap_first_min_selection() {
        let (net, vehicles) = fixture();
        let tl = build_timeline(&net, &vehicles).unwrap();
        let caps = split_cap_first(&net, &vehicles, &tl, 0, 0).unwrap();
        // f_max a / w = 1e9 · 12 / 4e10
        assert!((caps.frequency - 0.3).abs() < 1e-15);
        let factor = rate_cap_factor(&net.radio, 1e-8, 100.0, 0.95).unwrap();
        assert!((caps.rate - 5e6 * 20.0 / 1e9 * factor).abs() < 1e-12);
        assert_eq!(caps.value(), caps.frequency.min(caps.rate));
    }

    #[test]
    fn cap_first_zero_window() {
        let (net, mut vehicles) = fixture();
        vehicles[0].initial_distance_m = 0.0;
        let tl = build_timeline(&net, &vehicles).unwrap();
        let caps = split_cap_first(&net, &vehicles, &tl, 0, 0).unwrap();
        assert_eq!(caps.frequency, 0.0);
        assert_eq!(caps.value(), 0.0);
    }

    #[test]
    fn cap_second_windows() {
        let (net, v) = fixture();
        // non-overlapping visits: vehicle 2 enters RSU 1 after vehicle 1 has left
        let far = VehicleSpec { initial_distance_m: 2000.0, ..v[0] };
        let vehicles = vec![v[0], far];
        let tl = build_timeline(&net, &vehicles).unwrap();
        let caps = split_cap_second(&net, &vehicles, &tl, 0).unwrap();
        let own = SplitCaps::compute(&net, &far, 0, tl.arrival(0, 1) - tl.arrival(0, 0), tl.dwell(0, 1)).unwrap();
        assert_eq!(caps, own);

        // the first vehicle outlasts the second inside the coverage
        let arrival = CellGrid::from_fn(1, 2, |_, u| [10.0, 11.0][u]);
        let departure = CellGrid::from_fn(1, 2, |_, u| [30.0, 25.0][u]);
        let tl = Timeline::from_times(arrival, departure);
        let net1 = NetworkConfig::new(vec![net.rsus[0]], net.radio).unwrap();
        let caps = split_cap_second(&net1, &vehicles, &tl, 0).unwrap();
        assert_eq!(caps.rate, 0.0);
        assert_eq!(caps.value(), 0.0);
    }

    #[test]
    fn energy_report_single_cell() {
        let rsu = RsuConfig {
            coverage_m: 500.0,
            max_link_m: 250.0,
            beta: 1e-8,
            p_max_w: 100.0,
            f_max_hz: 1e9,
            kappa: 1e-11,
            epsilon: 3.0,
        };
        let net = NetworkConfig::new(vec![rsu], radio1()).unwrap();
        let v = VehicleSpec {
            velocity_mps: 25.0,
            initial_distance_m: 300.0,
            workload_cycles: 1e6,
            result_bits: 1e6,
            stp_target: 0.95,
        };
        let mut alloc = Allocation::zeros(1, 1);
        alloc.x.set(0, 0, 1.0);
        alloc.f_hz.set(0, 0, 100.0);
        alloc.t_cm_s.set(0, 0, 1.0);
        alloc.p_w.set(0, 0, optimal_power(&net.radio, 1e-8, 0.95, 1e6, 1.0, 1.0).unwrap());
        let report = total_energy(&net, &[v], &alloc);
        assert!((report.total_j - 0.102_898_982_347_936_8).abs() < 1e-14);
    }
}
