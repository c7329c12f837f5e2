//! Scenario documents (JSON) and their conversion into solver inputs.
//!
//! Unit-bearing fields carry their unit as a suffix. Unknown fields are
//! rejected so a misspelled unit (`velocity_mph`) is an error, not a default.

use std::fmt;
use std::path::Path;

use offload_core::model::{
    beta_from_link, build_timeline, units, NetworkConfig, RadioConstants, RsuConfig, VehicleSpec,
};
use offload_core::online::{LeftoverSpec, OnlineInstance};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_PATHLOSS_EXPONENT: f64 = 4.0;
pub const DEFAULT_CYCLES_PER_BIT: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    pub network: NetworkSection,
    pub vehicles: Vec<VehicleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online: Option<OnlineSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub antennas: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathloss_exponent: Option<f64>,
    /// Road order. An entry with `repeat: n` stands for n consecutive RSUs;
    /// `repeat_pattern` then repeats the whole expanded list.
    pub rsus: Vec<RsuEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_pattern: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuEntry {
    pub coverage_m: f64,
    pub p_max_dbm: f64,
    pub f_max_hz: f64,
    pub kappa: f64,
    pub epsilon: f64,
    /// Defaults to half the coverage (RSU at the middle of its interval).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_link_m: Option<f64>,
    /// Defaults to `max_link_m^(-pathloss_exponent)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleEntry {
    pub velocity_kmh: f64,
    /// Distance to the start of the first coverage interval at time 0.
    pub initial_distance_m: f64,
    pub result_size_mb: f64,
    /// Workload is `cycles_per_bit` times the result size in bits.
    #[serde(default = "default_cycles_per_bit")]
    pub cycles_per_bit: f64,
    pub stp_target: f64,
}

fn default_cycles_per_bit() -> f64 {
    DEFAULT_CYCLES_PER_BIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    pub t_now_s: f64,
    #[serde(default)]
    pub leftovers: Vec<LeftoverEntry>,
}

/// A vehicle admitted in an earlier epoch. Arrival and departure times follow
/// from its motion since time 0, like those of `vehicles`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeftoverEntry {
    pub velocity_kmh: f64,
    pub initial_distance_m: f64,
    pub result_size_mb: f64,
    #[serde(default = "default_cycles_per_bit")]
    pub cycles_per_bit: f64,
    pub residual_split: Vec<f64>,
    pub power_w: Vec<f64>,
    pub t_cm_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Mean velocity in km/h, differences between vehicles kept.
    Velocity,
    /// Second minus first vehicle's velocity in km/h, mean kept.
    VelocityDiff,
    /// Mean result size in MB, differences kept.
    ResultSize,
    /// Second minus first vehicle's result size in MB, mean kept.
    ResultDiff,
}

impl SweepParameter {
    pub fn column(self) -> &'static str {
        match self {
            Self::Velocity => "velocity_kmh",
            Self::VelocityDiff => "velocity_diff_kmh",
            Self::ResultSize => "result_size_mb",
            Self::ResultDiff => "result_diff_mb",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Velocity => "velocity",
            Self::VelocityDiff => "velocity_diff",
            Self::ResultSize => "result_size",
            Self::ResultDiff => "result_diff",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSection {
    /// `steps` evenly spaced values from `from` to `to`, both included.
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if self.steps == 0 || !self.from.is_finite() || !self.to.is_finite() {
            return Err(CliError::Invalid(format!(
                "sweep: need finite bounds and at least one step, got {}..{} in {}",
                self.from, self.to, self.steps
            )));
        }
        if self.steps == 1 {
            return Ok(vec![self.from]);
        }
        let n = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| if i + 1 == self.steps { self.to } else { self.from + (self.to - self.from) * i as f64 / n })
            .collect())
    }
}

/// Validated solver inputs plus the defaults that were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub id: String,
    pub net: NetworkConfig,
    pub vehicles: Vec<VehicleSpec>,
    pub online: Option<OnlineInstance>,
    pub assumptions: Vec<String>,
}

fn check(path: &str, ok: bool, what: &str, value: f64) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{path}: {what}, got {value}")))
    }
}

fn positive(path: &str, value: f64) -> Result<(), CliError> {
    check(path, value > 0.0 && value.is_finite(), "must be positive and finite", value)
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses JSON; errors carry the path of the offending field.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Invalid(format!("{path}: {}", e.into_inner()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn expanded_rsus(&self) -> Result<Vec<(String, RsuEntry)>, CliError> {
        let mut base = Vec::new();
        for (i, r) in self.network.rsus.iter().enumerate() {
            let n = r.repeat.unwrap_or(1);
            if n == 0 {
                return Err(CliError::Invalid(format!("network.rsus[{i}].repeat: must be at least 1")));
            }
            base.extend(std::iter::repeat_n((format!("network.rsus[{i}]"), r.clone()), n));
        }
        let times = self.network.repeat_pattern.unwrap_or(1);
        if times == 0 {
            return Err(CliError::Invalid("network.repeat_pattern: must be at least 1".into()));
        }
        Ok(base.iter().cloned().cycle().take(base.len() * times).collect())
    }

    fn network(&self, assumptions: &mut Vec<String>) -> Result<NetworkConfig, CliError> {
        let n = &self.network;
        positive("network.bandwidth_hz", n.bandwidth_hz)?;
        check("network.noise_dbm", n.noise_dbm.is_finite(), "must be finite", n.noise_dbm)?;
        if n.antennas == 0 {
            return Err(CliError::Invalid("network.antennas: must be at least 1".into()));
        }
        let alpha = n.pathloss_exponent.unwrap_or(DEFAULT_PATHLOSS_EXPONENT);
        positive("network.pathloss_exponent", alpha)?;
        if n.pathloss_exponent.is_none() {
            assumptions.push(format!("pathloss_exponent defaults to {DEFAULT_PATHLOSS_EXPONENT}"));
        }
        let entries = self.expanded_rsus()?;
        if entries.is_empty() {
            return Err(CliError::Invalid("network.rsus: need at least one RSU".into()));
        }
        let (mut link_default, mut beta_default) = (false, false);
        let mut rsus = Vec::with_capacity(entries.len());
        for (path, r) in &entries {
            positive(&format!("{path}.coverage_m"), r.coverage_m)?;
            check(&format!("{path}.p_max_dbm"), r.p_max_dbm.is_finite(), "must be finite", r.p_max_dbm)?;
            positive(&format!("{path}.f_max_hz"), r.f_max_hz)?;
            positive(&format!("{path}.kappa"), r.kappa)?;
            check(&format!("{path}.epsilon"), r.epsilon > 1.0 && r.epsilon.is_finite(), "must exceed 1", r.epsilon)?;
            let max_link_m = r.max_link_m.unwrap_or(r.coverage_m / 2.0);
            link_default |= r.max_link_m.is_none();
            positive(&format!("{path}.max_link_m"), max_link_m)?;
            let beta = r.beta.unwrap_or_else(|| beta_from_link(max_link_m, alpha));
            beta_default |= r.beta.is_none();
            positive(&format!("{path}.beta"), beta)?;
            rsus.push(RsuConfig {
                coverage_m: r.coverage_m,
                max_link_m,
                beta,
                p_max_w: units::dbm_to_w(r.p_max_dbm),
                f_max_hz: r.f_max_hz,
                kappa: r.kappa,
                epsilon: r.epsilon,
            });
        }
        if link_default {
            assumptions.push("max_link_m defaults to coverage_m/2 (RSU at the middle of its interval)".into());
        }
        if beta_default {
            assumptions.push(
                "beta defaults to max_link_m^(-pathloss_exponent), the large-scale fading at the coverage edge".into(),
            );
        }
        let radio = RadioConstants {
            bandwidth_hz: n.bandwidth_hz,
            noise_w: units::dbm_to_w(n.noise_dbm),
            antennas: n.antennas,
        };
        NetworkConfig::new(rsus, radio).map_err(|e| CliError::Invalid(format!("network: {e}")))
    }

    /// Validates the document into solver inputs.
    pub fn to_model(&self) -> Result<Model, CliError> {
        let mut assumptions = Vec::new();
        let net = self.network(&mut assumptions)?;
        let vehicles = self
            .vehicles
            .iter()
            .enumerate()
            .map(|(u, v)| vehicle(&format!("vehicles[{u}]"), v))
            .collect::<Result<Vec<_>, _>>()?;
        let online = match &self.online {
            None => None,
            Some(o) => Some(online(&net, &vehicles, o)?),
        };
        Ok(Model { id: self.id.clone(), net, vehicles, online, assumptions })
    }

    /// Copy with the sweep parameter set to `value`.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self, CliError> {
        let mut out = self.clone();
        let u = out.vehicles.len();
        let pair = |name: &str| {
            if u == 2 {
                Ok(())
            } else {
                Err(CliError::Invalid(format!("sweep.parameter: {name} needs exactly two vehicles, got {u}")))
            }
        };
        if u == 0 {
            return Err(CliError::Invalid("vehicles: sweeps need at least one vehicle".into()));
        }
        match parameter {
            SweepParameter::Velocity => shift_mean(&mut out.vehicles, value, |v| &mut v.velocity_kmh),
            SweepParameter::ResultSize => shift_mean(&mut out.vehicles, value, |v| &mut v.result_size_mb),
            SweepParameter::VelocityDiff => {
                pair("velocity_diff")?;
                set_diff(&mut out.vehicles, value, |v| &mut v.velocity_kmh);
            }
            SweepParameter::ResultDiff => {
                pair("result_diff")?;
                set_diff(&mut out.vehicles, value, |v| &mut v.result_size_mb);
            }
        }
        out.id = format!("{}@{}={}", self.id, parameter.column(), value);
        Ok(out)
    }

    /// K RSUs of 500 m, 50 dBm and 1.1 GHz.
    pub fn single_tier(rsus: usize, vehicles: Vec<VehicleEntry>) -> Self {
        Self {
            id: "single-tier".into(),
            network: NetworkSection { rsus: vec![rsu_entry(500.0, 50.0, 1.1e9, rsus)], ..default_network() },
            vehicles,
            online: None,
            sweep: None,
        }
    }

    /// `pairs` alternations of 600 m/55 dBm/1.2 GHz and 400 m/45 dBm/1.0 GHz RSUs.
    pub fn two_tier(pairs: usize, vehicles: Vec<VehicleEntry>) -> Self {
        Self {
            id: "two-tier".into(),
            network: NetworkSection {
                rsus: vec![rsu_entry(600.0, 55.0, 1.2e9, 1), rsu_entry(400.0, 45.0, 1.0e9, 1)],
                repeat_pattern: Some(pairs),
                ..default_network()
            },
            vehicles,
            online: None,
            sweep: None,
        }
    }
}

fn default_network() -> NetworkSection {
    NetworkSection {
        bandwidth_hz: 5e6,
        noise_dbm: -80.0,
        antennas: 4,
        pathloss_exponent: Some(DEFAULT_PATHLOSS_EXPONENT),
        rsus: Vec::new(),
        repeat_pattern: None,
    }
}

fn rsu_entry(coverage_m: f64, p_max_dbm: f64, f_max_hz: f64, repeat: usize) -> RsuEntry {
    RsuEntry {
        coverage_m,
        p_max_dbm,
        f_max_hz,
        kappa: 1e-11,
        epsilon: 3.0,
        max_link_m: None,
        beta: None,
        repeat: (repeat > 1).then_some(repeat),
    }
}

/// A vehicle with the default STP target 0.95 and 1000 cycles per bit.
pub fn default_vehicle(velocity_kmh: f64, initial_distance_m: f64, result_size_mb: f64) -> VehicleEntry {
    VehicleEntry {
        velocity_kmh,
        initial_distance_m,
        result_size_mb,
        cycles_per_bit: DEFAULT_CYCLES_PER_BIT,
        stp_target: 0.95,
    }
}

fn shift_mean(vehicles: &mut [VehicleEntry], mean: f64, field: impl Fn(&mut VehicleEntry) -> &mut f64) {
    let current = vehicles.iter_mut().map(|v| *field(v)).sum::<f64>() / vehicles.len() as f64;
    for v in vehicles {
        *field(v) += mean - current;
    }
}

fn set_diff(vehicles: &mut [VehicleEntry], diff: f64, field: impl Fn(&mut VehicleEntry) -> &mut f64) {
    let mean = (*field(&mut vehicles[0]) + *field(&mut vehicles[1])) / 2.0;
    *field(&mut vehicles[0]) = mean - diff / 2.0;
    *field(&mut vehicles[1]) = mean + diff / 2.0;
}

fn vehicle(path: &str, v: &VehicleEntry) -> Result<VehicleSpec, CliError> {
    positive(&format!("{path}.velocity_kmh"), v.velocity_kmh)?;
    check(
        &format!("{path}.initial_distance_m"),
        v.initial_distance_m >= 0.0 && v.initial_distance_m.is_finite(),
        "must be nonnegative",
        v.initial_distance_m,
    )?;
    positive(&format!("{path}.result_size_mb"), v.result_size_mb)?;
    positive(&format!("{path}.cycles_per_bit"), v.cycles_per_bit)?;
    check(&format!("{path}.stp_target"), v.stp_target > 0.0 && v.stp_target < 1.0, "must lie in (0, 1)", v.stp_target)?;
    let bits = units::mb_to_bits(v.result_size_mb);
    Ok(VehicleSpec {
        velocity_mps: units::kmh_to_mps(v.velocity_kmh),
        initial_distance_m: v.initial_distance_m,
        workload_cycles: v.cycles_per_bit * bits,
        result_bits: bits,
        stp_target: v.stp_target,
    })
}

fn online(net: &NetworkConfig, arrivals: &[VehicleSpec], o: &OnlineSection) -> Result<OnlineInstance, CliError> {
    check("online.t_now_s", o.t_now_s >= 0.0 && o.t_now_s.is_finite(), "must be nonnegative", o.t_now_s)?;
    let mut leftovers = Vec::with_capacity(o.leftovers.len());
    for (q, l) in o.leftovers.iter().enumerate() {
        let path = format!("online.leftovers[{q}]");
        // only the motion matters for the coverage times
        let motion = vehicle(
            &path,
            &VehicleEntry {
                velocity_kmh: l.velocity_kmh,
                initial_distance_m: l.initial_distance_m,
                result_size_mb: l.result_size_mb,
                cycles_per_bit: l.cycles_per_bit,
                stp_target: 0.5,
            },
        )?;
        let tl = build_timeline(net, &[motion]).map_err(|e| CliError::Invalid(format!("{path}: {e}")))?;
        leftovers.push(LeftoverSpec {
            residual_split: l.residual_split.clone(),
            workload_cycles: motion.workload_cycles,
            result_bits: motion.result_bits,
            power_w: l.power_w.clone(),
            t_cm_s: l.t_cm_s.clone(),
            arrival_s: (0..net.num_rsus()).map(|k| tl.arrival(k, 0)).collect(),
            departure_s: (0..net.num_rsus()).map(|k| tl.departure(k, 0)).collect(),
            velocity_mps: motion.velocity_mps,
        });
    }
    let inst = OnlineInstance { net: net.clone(), t_now: o.t_now_s, arrivals: arrivals.to_vec(), leftovers };
    inst.validate().map_err(|e| CliError::Invalid(format!("online: {e}")))?;
    Ok(inst)
}
