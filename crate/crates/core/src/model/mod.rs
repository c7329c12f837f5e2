//! Network, vehicle and schedule vocabulary shared by every solver.
//!
//! All quantities are SI: meters, seconds, hertz, watts, bits, CPU cycles and
//! joules. Unit conversions (km/h, MB, dBm) happen at the scenario boundary,
//! see [`units`].

mod energy;
mod gamma;
mod timeline;

pub use energy::{
    comm_energy_time_form, comp_energy, comp_energy_time_form, optimal_power, rate_cap_factor, split_cap_first,
    split_cap_second, total_energy, SplitCaps,
};
pub use gamma::{gamma_ccdf, gamma_ccdf_inv};
pub use timeline::{build_timeline, Timeline};

use crate::error::{invalid, Result};

/// Shared radio constants of the downlink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConstants {
    pub bandwidth_hz: f64,
    /// Noise power σ² in watts.
    pub noise_w: f64,
    /// Transmit antennas per RSU.
    pub antennas: u32,
}

impl RadioConstants {
    pub fn new(bandwidth_hz: f64, noise_w: f64, antennas: u32) -> Result<Self> {
        let radio = Self { bandwidth_hz, noise_w, antennas };
        radio.validate()?;
        Ok(radio)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(invalid(format!("bandwidth_hz must be positive, got {}", self.bandwidth_hz)));
        }
        if !(self.noise_w > 0.0 && self.noise_w.is_finite()) {
            return Err(invalid(format!("noise_w must be positive, got {}", self.noise_w)));
        }
        if self.antennas == 0 {
            return Err(invalid("antennas must be at least 1"));
        }
        Ok(())
    }
}

/// One roadside unit: coverage interval, radio and CPU limits, energy coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsuConfig {
    /// Length of the road interval covered by this RSU.
    pub coverage_m: f64,
    /// Longest link inside the coverage interval.
    pub max_link_m: f64,
    /// Large-scale fading power at `max_link_m` (dimensionless).
    pub beta: f64,
    pub p_max_w: f64,
    pub f_max_hz: f64,
    /// Effective switched capacitance.
    pub kappa: f64,
    /// DVFS exponent, energy per cycle grows as f^(epsilon - 1).
    pub epsilon: f64,
}

/// Large-scale fading power of a link of length `link_m` under path-loss exponent `alpha`.
pub fn beta_from_link(link_m: f64, alpha: f64) -> f64 {
    link_m.powf(-alpha)
}

impl RsuConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("coverage_m", self.coverage_m),
            ("max_link_m", self.max_link_m),
            ("beta", self.beta),
            ("p_max_w", self.p_max_w),
            ("f_max_hz", self.f_max_hz),
            ("kappa", self.kappa),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if !(self.epsilon > 1.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must exceed 1, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// The RSU chain in road order plus the radio constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub rsus: Vec<RsuConfig>,
    pub radio: RadioConstants,
}

impl NetworkConfig {
    pub fn new(rsus: Vec<RsuConfig>, radio: RadioConstants) -> Result<Self> {
        let net = Self { rsus, radio };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rsus.is_empty() {
            return Err(invalid("network needs at least one RSU"));
        }
        for (k, rsu) in self.rsus.iter().enumerate() {
            rsu.validate().map_err(|e| invalid(format!("rsus[{k}]: {e}")))?;
        }
        self.radio.validate()
    }

    pub fn num_rsus(&self) -> usize {
        self.rsus.len()
    }

    /// True when coverage, fading and energy coefficients agree across RSUs.
    pub fn is_homogeneous(&self) -> bool {
        let first = &self.rsus[0];
        self.rsus.iter().all(|r| {
            r.coverage_m == first.coverage_m
                && r.beta == first.beta
                && r.kappa == first.kappa
                && r.epsilon == first.epsilon
        })
    }
}

/// A vehicle with its offloaded task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSpec {
    pub velocity_mps: f64,
    /// Distance to the start of RSU 1's coverage at time 0.
    pub initial_distance_m: f64,
    pub workload_cycles: f64,
    pub result_bits: f64,
    /// Target successful transmission probability ρ.
    pub stp_target: f64,
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.velocity_mps > 0.0 && self.velocity_mps.is_finite()) {
            return Err(invalid(format!("velocity must be positive, got {}", self.velocity_mps)));
        }
        if !(self.initial_distance_m >= 0.0 && self.initial_distance_m.is_finite()) {
            return Err(invalid(format!("initial distance must be nonnegative, got {}", self.initial_distance_m)));
        }
        if !(self.workload_cycles > 0.0 && self.workload_cycles.is_finite()) {
            return Err(invalid(format!("workload must be positive, got {}", self.workload_cycles)));
        }
        if !(self.result_bits > 0.0 && self.result_bits.is_finite()) {
            return Err(invalid(format!("result size must be positive, got {}", self.result_bits)));
        }
        if !(self.stp_target > 0.0 && self.stp_target < 1.0) {
            return Err(invalid(format!("stp_target must lie in (0,1), got {}", self.stp_target)));
        }
        Ok(())
    }
}

/// Dense K×U matrix indexed by (RSU, vehicle), both zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    rsus: usize,
    vehicles: usize,
    data: Vec<f64>,
}

impl CellGrid {
    pub fn zeros(rsus: usize, vehicles: usize) -> Self {
        Self { rsus, vehicles, data: vec![0.0; rsus * vehicles] }
    }

    pub fn from_fn(rsus: usize, vehicles: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut grid = Self::zeros(rsus, vehicles);
        for k in 0..rsus {
            for u in 0..vehicles {
                grid.set(k, u, f(k, u));
            }
        }
        grid
    }

    pub fn rsus(&self) -> usize {
        self.rsus
    }

    pub fn vehicles(&self) -> usize {
        self.vehicles
    }

    #[inline]
    pub fn get(&self, k: usize, u: usize) -> f64 {
        self.data[k * self.vehicles + u]
    }

    #[inline]
    pub fn set(&mut self, k: usize, u: usize, value: f64) {
        self.data[k * self.vehicles + u] = value;
    }

    pub fn column(&self, u: usize) -> Vec<f64> {
        (0..self.rsus).map(|k| self.get(k, u)).collect()
    }

    pub fn column_sum(&self, u: usize) -> f64 {
        (0..self.rsus).map(|k| self.get(k, u)).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// A complete schedule: split, CPU frequency, power and time windows per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: CellGrid,
    pub f_hz: CellGrid,
    pub p_w: CellGrid,
    pub t_cm_s: CellGrid,
    pub s_cp_s: CellGrid,
    pub s_cm_s: CellGrid,
    /// Computation time w·x/f (zero where x is zero).
    pub t_cp_s: CellGrid,
}

impl Allocation {
    pub fn zeros(rsus: usize, vehicles: usize) -> Self {
        let z = CellGrid::zeros(rsus, vehicles);
        Self {
            x: z.clone(),
            f_hz: z.clone(),
            p_w: z.clone(),
            t_cm_s: z.clone(),
            s_cp_s: z.clone(),
            s_cm_s: z.clone(),
            t_cp_s: z,
        }
    }

    pub fn rsus(&self) -> usize {
        self.x.rsus()
    }

    pub fn vehicles(&self) -> usize {
        self.x.vehicles()
    }
}

/// Per-cell computation and communication energy plus their total.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub e_cp_j: CellGrid,
    pub e_cm_j: CellGrid,
    pub total_j: f64,
}

/// Conversions applied when reading scenario files.
pub mod units {
    pub fn kmh_to_mps(kmh: f64) -> f64 {
        kmh * 1000.0 / 3600.0
    }

    pub fn mps_to_kmh(mps: f64) -> f64 {
        mps * 3600.0 / 1000.0
    }

    /// Megabytes to bits (1 MB = 8·10⁶ bits).
    pub fn mb_to_bits(mb: f64) -> f64 {
        mb * 8e6
    }

    pub fn bits_to_mb(bits: f64) -> f64 {
        bits / 8e6
    }

    pub fn dbm_to_w(dbm: f64) -> f64 {
        10f64.powf((dbm - 30.0) / 10.0)
    }

    pub fn w_to_dbm(w: f64) -> f64 {
        10.0 * w.log10() + 30.0
    }
}
