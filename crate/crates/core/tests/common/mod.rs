#![allow(dead_code)]

use offload_core::model::{beta_from_link, units, NetworkConfig, RadioConstants, RsuConfig, VehicleSpec};

pub const CYCLES_PER_BIT: f64 = 1000.0;

pub fn rsu(coverage_m: f64, p_max_dbm: f64, f_max_hz: f64) -> RsuConfig {
    RsuConfig {
        coverage_m,
        max_link_m: coverage_m / 2.0,
        beta: beta_from_link(coverage_m / 2.0, 4.0),
        p_max_w: units::dbm_to_w(p_max_dbm),
        f_max_hz,
        kappa: 1e-11,
        epsilon: 3.0,
    }
}

pub fn radio(antennas: u32) -> RadioConstants {
    RadioConstants { bandwidth_hz: 5e6, noise_w: units::dbm_to_w(-80.0), antennas }
}

/// `k` identical 500 m RSUs at 50 dBm and 1.1 GHz.
pub fn single_tier(k: usize) -> NetworkConfig {
    NetworkConfig::new(vec![rsu(500.0, 50.0, 1.1e9); k], radio(4)).unwrap()
}

pub fn vehicle(kmh: f64, d0_m: f64, result_mb: f64) -> VehicleSpec {
    let bits = units::mb_to_bits(result_mb);
    VehicleSpec {
        velocity_mps: units::kmh_to_mps(kmh),
        initial_distance_m: d0_m,
        workload_cycles: CYCLES_PER_BIT * bits,
        result_bits: bits,
        stp_target: 0.95,
    }
}
