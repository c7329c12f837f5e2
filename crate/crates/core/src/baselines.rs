//! Reference splitters: best-effort-first (BEF) fills the per-RSU split caps
//! from the first RSU forward, best-effort-last (BEL) from the last RSU
//! backward. Schedules are evaluated deadline-tight, which is the
//! minimum-energy resource allocation for a fixed split.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, OffloadError, Result};
use crate::model::{
    build_timeline, optimal_power, split_cap_first, split_cap_second, total_energy, Allocation, CellGrid, EnergyReport,
    NetworkConfig, SplitCaps, Timeline, VehicleSpec,
};
use crate::single::SingleVehicleInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Bef,
    Bel,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 2] = [BaselineKind::Bef, BaselineKind::Bel];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Bef => "bef",
            BaselineKind::Bel => "bel",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = OffloadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bef" => Ok(BaselineKind::Bef),
            "bel" => Ok(BaselineKind::Bel),
            _ => Err(invalid(format!("unknown baseline `{s}`, expected bef or bel"))),
        }
    }
}

/// Fills `caps` in RSU order (BEF) or reverse order (BEL) until the task is
/// placed; the RSU where the running sum first exceeds one takes the rest.
pub fn fill_caps(caps: &[f64], kind: BaselineKind) -> Option<Vec<f64>> {
    if caps.iter().sum::<f64>() < 1.0 {
        return None;
    }
    let mut x = vec![0.0; caps.len()];
    let order: Box<dyn Iterator<Item = usize>> = match kind {
        BaselineKind::Bef => Box::new(0..caps.len()),
        BaselineKind::Bel => Box::new((0..caps.len()).rev()),
    };
    let mut left = 1.0;
    for k in order {
        if left <= 0.0 {
            break;
        }
        x[k] = caps[k].min(left);
        left -= x[k];
    }
    Some(x)
}

fn cap_shortfall(who: &str, caps: &[SplitCaps]) -> OffloadError {
    let total: f64 = caps.iter().map(|c| c.value()).sum();
    let freq = caps.iter().filter(|c| c.binding() == "frequency").count();
    OffloadError::Infeasible(format!(
        "{who}: split caps sum to {total:.6} < 1 (frequency cap binds at {freq} RSUs, transmit-power cap at {})",
        caps.len() - freq
    ))
}

/// Baseline split of a single vehicle's task.
pub fn split_baseline_single(inst: &SingleVehicleInstance, kind: BaselineKind) -> Result<Vec<f64>> {
    let caps = (0..inst.rsus()).map(|k| inst.caps(k)).collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = caps.iter().map(|c| c.value()).collect();
    fill_caps(&values, kind).ok_or_else(|| cap_shortfall("vehicle 1", &caps))
}

/// Baseline splits of two vehicles, K×2. At each RSU the earlier vehicle
/// gets the single-vehicle cap and the later one the cap left after the
/// earlier vehicle uses its full windows; each vehicle then fills its caps.
pub fn split_baseline_multi(net: &NetworkConfig, vehicles: &[VehicleSpec], kind: BaselineKind) -> Result<CellGrid> {
    if vehicles.len() != 2 {
        return Err(invalid(format!("two-vehicle baselines need exactly two vehicles, got {}", vehicles.len())));
    }
    let timeline = build_timeline(net, vehicles)?;
    let k_total = net.num_rsus();
    let mut caps: Vec<Vec<SplitCaps>> = vec![Vec::with_capacity(k_total), Vec::with_capacity(k_total)];
    for k in 0..k_total {
        let first = timeline.ordering[k][0];
        caps[first].push(split_cap_first(net, vehicles, &timeline, k, first)?);
        caps[1 - first].push(split_cap_second(net, vehicles, &timeline, k)?);
    }
    let mut x = CellGrid::zeros(k_total, 2);
    for (u, c) in caps.iter().enumerate() {
        let values: Vec<f64> = c.iter().map(|c| c.value()).collect();
        let col = fill_caps(&values, kind).ok_or_else(|| cap_shortfall(&format!("vehicle {}", u + 1), c))?;
        for (k, v) in col.into_iter().enumerate() {
            x.set(k, u, v);
        }
    }
    Ok(x)
}

/// Deadline-tight schedule for a fixed split. At each RSU the busy vehicles
/// are served in arrival order: each computes from the previous busy
/// vehicle's arrival up to its own at `f = w x / window` and transmits from
/// `max(a, previous departure)` to its departure at the minimum STP power.
pub fn schedule_for_split(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    timeline: &Timeline,
    x: &CellGrid,
) -> Result<Allocation> {
    let (k_total, u_total) = (net.num_rsus(), vehicles.len());
    if x.rsus() != k_total || x.vehicles() != u_total {
        return Err(invalid(format!("split is {}×{}, expected {k_total}×{u_total}", x.rsus(), x.vehicles())));
    }
    let mut alloc = Allocation::zeros(k_total, u_total);
    for (k, rsu) in net.rsus.iter().enumerate() {
        let (mut cp_free, mut cm_free) = (0.0_f64, 0.0_f64);
        for &u in &timeline.ordering[k] {
            let (a, d) = (timeline.arrival(k, u), timeline.departure(k, u));
            let xk = x.get(k, u);
            alloc.s_cp_s.set(k, u, cp_free.min(a));
            alloc.s_cm_s.set(k, u, a.max(cm_free).min(d));
            if xk == 0.0 {
                continue;
            }
            let v = &vehicles[u];
            let (cp_window, cm_start) = (a - cp_free, a.max(cm_free));
            let cm_window = d - cm_start;
            if !(cp_window > 0.0 && cm_window > 0.0) {
                return Err(OffloadError::InfeasibleInput(format!(
                    "RSU {}: split {xk} of vehicle {} has no free compute or transmission window",
                    k + 1,
                    u + 1
                )));
            }
            alloc.x.set(k, u, xk);
            alloc.t_cp_s.set(k, u, cp_window);
            alloc.f_hz.set(k, u, v.workload_cycles * xk / cp_window);
            alloc.t_cm_s.set(k, u, cm_window);
            alloc.p_w.set(k, u, optimal_power(&net.radio, rsu.beta, v.stp_target, v.result_bits, xk, cm_window)?);
            cp_free = a;
            cm_free = d;
        }
    }
    Ok(alloc)
}

/// Deadline-tight schedule and energy for a split.
pub fn evaluate_baseline(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    x: &CellGrid,
) -> Result<(Allocation, EnergyReport)> {
    let timeline = build_timeline(net, vehicles)?;
    let alloc = schedule_for_split(net, vehicles, &timeline, x)?;
    let report = total_energy(net, vehicles, &alloc);
    Ok((alloc, report))
}

/// Split, schedule and energy of one baseline for one or two vehicles.
pub fn run_baseline(
    net: &NetworkConfig,
    vehicles: &[VehicleSpec],
    kind: BaselineKind,
) -> Result<(Allocation, EnergyReport)> {
    let x = match vehicles {
        [v] => {
            let inst = SingleVehicleInstance::new(net.clone(), *v)?;
            let col = split_baseline_single(&inst, kind)?;
            CellGrid::from_fn(col.len(), 1, |k, _| col[k])
        }
        [_, _] => split_baseline_multi(net, vehicles, kind)?,
        _ => return Err(invalid(format!("baselines are defined for one or two vehicles, got {}", vehicles.len()))),
    };
    evaluate_baseline(net, vehicles, &x)
}
