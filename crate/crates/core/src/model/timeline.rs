use super::{CellGrid, NetworkConfig, VehicleSpec};
use crate::error::{invalid, Result};

/// Arrival/departure times of every vehicle at every RSU and the per-RSU
/// arrival orderings.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub arrival_s: CellGrid,
    pub departure_s: CellGrid,
    /// `ordering[k][m]` is the vehicle that is the m-th to enter RSU k.
    pub ordering: Vec<Vec<usize>>,
}

impl Timeline {
    pub fn rsus(&self) -> usize {
        self.arrival_s.rsus()
    }

    pub fn vehicles(&self) -> usize {
        self.arrival_s.vehicles()
    }

    /// Compute window `[0, a]` available before the vehicle reaches RSU k.
    pub fn arrival(&self, k: usize, u: usize) -> f64 {
        self.arrival_s.get(k, u)
    }

    pub fn departure(&self, k: usize, u: usize) -> f64 {
        self.departure_s.get(k, u)
    }

    /// Dwell time inside RSU k's coverage.
    pub fn dwell(&self, k: usize, u: usize) -> f64 {
        self.departure(k, u) - self.arrival(k, u)
    }

    /// Builds a timeline from explicit times, recomputing the orderings.
    pub fn from_times(arrival_s: CellGrid, departure_s: CellGrid) -> Self {
        let ordering = orderings(&arrival_s);
        Self { arrival_s, departure_s, ordering }
    }
}

/// Per-RSU orderings sorted by arrival time; ties go to the lower vehicle index.
pub(crate) fn orderings(arrival: &CellGrid) -> Vec<Vec<usize>> {
    (0..arrival.rsus())
        .map(|k| {
            let mut order: Vec<usize> = (0..arrival.vehicles()).collect();
            order.sort_by(|&a, &b| arrival.get(k, a).total_cmp(&arrival.get(k, b)).then(a.cmp(&b)));
            order
        })
        .collect()
}

/// Arrival `a_{k,u} = (d⁰_u + Σ_{i<k} l_i)/v_u` and departure
/// `d_{k,u} = (d⁰_u + Σ_{i≤k} l_i)/v_u`, so a vehicle leaves RSU k exactly
/// when it enters RSU k+1.
pub fn build_timeline(net: &NetworkConfig, vehicles: &[VehicleSpec]) -> Result<Timeline> {
    if vehicles.is_empty() {
        return Err(invalid("at least one vehicle is required"));
    }
    net.validate()?;
    for (u, v) in vehicles.iter().enumerate() {
        v.validate().map_err(|e| invalid(format!("vehicles[{u}]: {e}")))?;
    }
    let k_total = net.num_rsus();
    let mut arrival = CellGrid::zeros(k_total, vehicles.len());
    let mut departure = CellGrid::zeros(k_total, vehicles.len());
    for (u, v) in vehicles.iter().enumerate() {
        let mut covered = 0.0;
        for (k, rsu) in net.rsus.iter().enumerate() {
            arrival.set(k, u, (v.initial_distance_m + covered) / v.velocity_mps);
            covered += rsu.coverage_m;
            departure.set(k, u, (v.initial_distance_m + covered) / v.velocity_mps);
        }
    }
    Ok(Timeline::from_times(arrival, departure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RadioConstants, RsuConfig};

    fn net(coverages: &[f64]) -> NetworkConfig {
        let rsus = coverages
            .iter()
            .map(|&l| RsuConfig {
                coverage_m: l,
                max_link_m: l / 2.0,
                beta: 1e-8,
                p_max_w: 100.0,
                f_max_hz: 1.1e9,
                kappa: 1e-11,
                epsilon: 3.0,
            })
            .collect();
        NetworkConfig::new(rsus, RadioConstants { bandwidth_hz: 5e6, noise_w: 1e-11, antennas: 1 }).unwrap()
    }

    fn vehicle(v: f64, d0: f64) -> VehicleSpec {
        VehicleSpec {
            velocity_mps: v,
            initial_distance_m: d0,
            workload_cycles: 1e9,
            result_bits: 1e6,
            stp_target: 0.95,
        }
    }

    #[test]
    fn two_rsu_example() {
        let tl = build_timeline(&net(&[500.0, 500.0]), &[vehicle(25.0, 300.0)]).unwrap();
        assert_eq!(tl.arrival(0, 0), 12.0);
        assert_eq!(tl.arrival(1, 0), 32.0);
        assert_eq!(tl.departure(0, 0), 32.0);
        assert_eq!(tl.departure(1, 0), 52.0);
    }

    #[test]
    fn zero_initial_distance_arrives_at_zero() {
        let tl = build_timeline(&net(&[500.0]), &[vehicle(25.0, 0.0)]).unwrap();
        assert_eq!(tl.arrival(0, 0), 0.0);
    }

    #[test]
    fn ordering_by_arrival() {
        // 300/20 = 15 s < 400/25 = 16 s
        let tl = build_timeline(&net(&[500.0]), &[vehicle(20.0, 300.0), vehicle(25.0, 400.0)]).unwrap();
        assert_eq!(tl.ordering[0], vec![0, 1]);
        let tl = build_timeline(&net(&[500.0]), &[vehicle(25.0, 400.0), vehicle(20.0, 300.0)]).unwrap();
        assert_eq!(tl.ordering[0], vec![1, 0]);
    }

    #[test]
    fn ordering_can_flip_between_rsus() {
        // slow vehicle enters first, the fast one overtakes before RSU 2
        let tl = build_timeline(&net(&[500.0, 500.0, 500.0]), &[vehicle(10.0, 10.0), vehicle(40.0, 100.0)]).unwrap();
        assert_eq!(tl.ordering[0], vec![0, 1]);
        assert_eq!(tl.ordering[1], vec![1, 0]);
        assert_eq!(tl.ordering[2], vec![1, 0]);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let tl = build_timeline(&net(&[500.0]), &[vehicle(20.0, 200.0), vehicle(20.0, 200.0)]).unwrap();
        assert_eq!(tl.ordering[0], vec![0, 1]);
    }

    #[test]
    fn contiguous_coverage() {
        let tl =
            build_timeline(&net(&[600.0, 400.0, 600.0, 400.0]), &[vehicle(21.0, 300.0), vehicle(23.5, 410.0)]).unwrap();
        for u in 0..2 {
            for k in 0..3 {
                assert_eq!(tl.departure(k, u), tl.arrival(k + 1, u));
            }
            for k in 0..4 {
                assert!(tl.departure(k, u) > tl.arrival(k, u));
            }
        }
    }

    #[test]
    fn empty_vehicle_list_rejected() {
        assert!(build_timeline(&net(&[500.0]), &[]).is_err());
    }
}
