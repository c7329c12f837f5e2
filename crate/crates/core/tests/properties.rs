mod common;

use offload_core::baselines::{fill_caps, BaselineKind};
use offload_core::convex::Objective;
use offload_core::model::{
    build_timeline, comp_energy, comp_energy_time_form, gamma_ccdf, gamma_ccdf_inv, optimal_power, total_energy,
};
use offload_core::multi::build_problem2;
use offload_core::oracle::finite_diff;
use offload_core::single::{h_k, h_k_inv, recover_allocation, solve_master, SingleVehicleInstance};
use proptest::prelude::*;

use common::{radio, single_tier, vehicle};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_inverse_round_trips(rho in 0.05f64..0.995, n in 1u32..=8) {
        let y = gamma_ccdf_inv(rho, n).unwrap();
        prop_assert!((gamma_ccdf(y, n) - rho).abs() <= 1e-9);
    }

    #[test]
    fn time_form_matches_frequency_form(x in 0.01f64..1.0, t in 0.1f64..200.0, w in 1e9f64..1e12) {
        let e = comp_energy_time_form(1e-11, 3.0, w, x, t).unwrap();
        let direct = comp_energy(1e-11, 3.0, w * x, w * x / t);
        prop_assert!((e - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn optimal_power_meets_target_exactly(x in 0.01f64..1.0, t in 0.5f64..30.0, mb in 1.0f64..50.0, n in 1u32..=4) {
        let r = radio(n);
        let d = mb * 8e6;
        let beta = 250f64.powi(-4);
        let p = optimal_power(&r, beta, 0.95, d, x, t).unwrap();
        let need = (std::f64::consts::LN_2 * d * x / (r.bandwidth_hz * t)).exp_m1();
        let stp = gamma_ccdf(r.noise_w * need / (p * beta), n);
        prop_assert!((stp - 0.95).abs() <= 1e-9);
    }

    #[test]
    fn h_is_increasing_and_inverts(kmh in 60.0f64..140.0, mb in 50.0f64..400.0, x1 in 0.0f64..0.5, dx in 1e-3f64..0.5) {
        let inst = SingleVehicleInstance::new(single_tier(3), vehicle(kmh, 400.0, mb)).unwrap();
        for k in 0..3 {
            let (a, b) = (h_k(&inst, k, x1), h_k(&inst, k, x1 + dx));
            prop_assert!(a < b);
            let back = h_k_inv(&inst, k, b);
            prop_assert!((back - (x1 + dx)).abs() <= 1e-9 * (x1 + dx));
        }
    }

    #[test]
    fn master_split_is_a_capped_distribution(kmh in 60.0f64..140.0, mb in 50.0f64..250.0, d0 in 100.0f64..2000.0) {
        // twenty RSUs leave at least 2.7e12 cycles of compute, above the 2e12 needed
        let inst = SingleVehicleInstance::new(single_tier(20), vehicle(kmh, d0, mb)).unwrap();
        let m = solve_master(&inst).unwrap();
        prop_assert!((m.x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for (x, cap) in m.x.iter().zip(&m.caps) {
            prop_assert!(*x >= 0.0 && *x <= cap * (1.0 + 1e-12));
        }
        // reported energy is the model energy of the recovered schedule
        let alloc = recover_allocation(&inst, &m.x).unwrap();
        let rep = total_energy(&inst.net, &[inst.vehicle], &alloc);
        prop_assert!(rep.total_j.is_finite() && rep.total_j > 0.0);
    }

    #[test]
    fn schedule_objective_is_midpoint_convex(seed in any::<u64>()) {
        let net = single_tier(2);
        let vs = [vehicle(75.0, 400.0, 300.0), vehicle(80.0, 900.0, 200.0)];
        let tl = build_timeline(&net, &vs).unwrap();
        let (p, _) = build_problem2(&net, &vs, &tl).unwrap();
        let n = p.dimension();
        let mut state = seed | 1;
        let mut draw = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let point = |draw: &mut dyn FnMut() -> f64| -> Vec<f64> {
            (0..n).map(|i| if i < 4 { 0.05 + 0.9 * draw() } else { 1.0 + 99.0 * draw() }).collect()
        };
        let (z1, z2) = (point(&mut draw), point(&mut draw));
        let mid: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| 0.5 * (a + b)).collect();
        let (f1, f2, fm) = (p.objective.value(&z1), p.objective.value(&z2), p.objective.value(&mid));
        prop_assert!(fm <= 0.5 * (f1 + f2) * (1.0 + 1e-12));
    }

    #[test]
    fn objective_gradient_matches_differences(seed in any::<u64>()) {
        let net = single_tier(2);
        let vs = [vehicle(75.0, 400.0, 300.0)];
        let tl = build_timeline(&net, &vs).unwrap();
        let (p, l) = build_problem2(&net, &vs, &tl).unwrap();
        let mut z = vec![0.0; p.dimension()];
        let u = (seed % 1000) as f64 / 1000.0;
        z[l.x(0, 0)] = 0.1 + 0.8 * u;
        z[l.x(1, 0)] = 0.9 - 0.8 * u;
        for k in 0..2 {
            z[l.t_cp(k, 0)] = 5.0 + 20.0 * u + 10.0 * k as f64;
            z[l.t_cm(k, 0)] = 3.0 + 10.0 * (1.0 - u) + k as f64;
        }
        let mut g = vec![0.0; z.len()];
        p.objective.gradient(&z, &mut g);
        let fd = finite_diff(|v| p.objective.value(v), &z, 1e-6);
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-5 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn baseline_fill_is_a_contiguous_capped_distribution(caps in prop::collection::vec(0.0f64..0.8, 2..8)) {
        for kind in [BaselineKind::Bef, BaselineKind::Bel] {
            let Some(x) = fill_caps(&caps, kind) else {
                prop_assert!(caps.iter().sum::<f64>() < 1.0);
                continue;
            };
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (xi, ci) in x.iter().zip(&caps) {
                prop_assert!(*xi >= 0.0 && xi <= ci);
            }
            // support: every cap before (BEF) or after (BEL) the pivot is exhausted
            let support: Vec<usize> = (0..x.len()).filter(|&k| x[k] > 0.0).collect();
            if let (Some(&lo), Some(&hi)) = (support.first(), support.last()) {
                let inner = match kind {
                    BaselineKind::Bef => lo..hi,
                    BaselineKind::Bel => lo + 1..hi + 1,
                };
                for k in inner {
                    prop_assert_eq!(x[k], caps[k]);
                }
            }
        }
    }
}
