//! The experiment document: one JSON file drives every subcommand.
//!
//! Parsing reports the exact field path of a malformed value, and
//! [`ExperimentConfig::validate`] checks cross-references (user count `J`,
//! state count `K`) before anything runs.

use std::path::Path;

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::capacity::{self, CapacityRegion};
use crate::heavy_traffic::{self, HeavyTrafficSpec};
use crate::markov_env::{self, EnvGenerator};
use crate::mimo::{self, ChannelSet, CMatrix};
use crate::queue_sim::{PolicyKind, TrafficSpec};
use crate::rdrs::RdrsSpec;
use crate::utility::{RateUtility, UtilityFamily};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("bad override '{0}' (expected path=value)")]
    Override(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub environment: EnvironmentConfig,
    pub region: RegionConfig,
    pub utility: UtilityConfig,
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    pub heavy_traffic: HeavyTrafficConfig,
    #[serde(default)]
    pub rdrs: RdrsConfig,
    #[serde(default)]
    pub capacity_trace: CapacityTraceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    /// Holding rate `γ(i)` of each state.
    pub holding_rates: Vec<f64>,
    /// Embedded jump-chain matrix `q_il` (zero diagonal).
    pub embedded: Vec<Vec<f64>>,
    #[serde(default)]
    pub initial_state: usize,
}

/// A complex number written as a real scalar or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// Row-major complex matrix as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixConfig {
    pub fn to_matrix(&self, field: &str) -> Result<CMatrix, ConfigError> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 || self.re.iter().any(|r| r.len() != cols) {
            return Err(invalid(format!("{field}.re"), "must be a non-empty rectangular matrix"));
        }
        if let Some(im) = &self.im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(invalid(format!("{field}.im"), "must have the shape of re"));
            }
        }
        Ok(CMatrix::from_fn(rows, cols, |a, b| Complex64::new(self.re[a][b], self.im.as_ref().map_or(0.0, |m| m[a][b]))))
    }
}

fn default_divisions() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionConfig {
    /// `{c ≥ 0 : Σ c_j ≤ C_U(i)}`.
    Simplex { users: usize, sum_capacity: Vec<f64> },
    /// Single-antenna uplink: `gains[i][j]` is the scalar channel of user `j` in state `i`.
    Mac2 { powers: Vec<f64>, gains: Vec<Vec<ComplexValue>> },
    /// Broadcast channel with one receive antenna per user; `channels[i][j]` is `1×M`.
    Bc2 {
        total_power: f64,
        channels: Vec<Vec<MatrixConfig>>,
        #[serde(default = "default_divisions")]
        divisions: usize,
    },
    /// Multi-antenna uplink; `channels[i][j]` is the `N×M` downlink matrix.
    MimoMac {
        powers: Vec<f64>,
        channels: Vec<Vec<MatrixConfig>>,
        #[serde(default = "default_divisions")]
        divisions: usize,
    },
    Custom { family: CustomFamily },
}

/// Analytically tractable test regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CustomFamily {
    /// Sum facet plus the disk `‖c‖ ≤ radius`, per state.
    DiskSimplex { users: usize, radius: Vec<f64>, sum_capacity: Vec<f64> },
    /// Ellipse `Σ (c_j / a_j)² ≤ 1`; `axes[i]` per state.
    Ellipse { axes: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UtilityConfig {
    /// `U_j = w_j q log(1 + c)`.
    LinearLog { weights: Vec<f64> },
    /// `U_j = q^β c^{1−α}/(1−α)`.
    Power { beta: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    /// `λ_j(i)`, `[user][state]`; when absent, runs use the heavy-traffic rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rates: Option<Vec<Vec<f64>>>,
    /// `α_j²(i)`, `[user][state]`.
    pub arrival_scv: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// `β_j²`.
    pub size_scv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub grid_step: f64,
    pub policy: PolicyKind,
    /// Scale used for the arrival rates when `traffic.arrival_rates` is absent
    /// (default: largest scale of the ladder).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub record_events: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { horizon: 100.0, grid_step: 0.1, policy: PolicyKind::UtilityMax, scale: None, record_events: false }
    }
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::UtilityMax, PolicyKind::MaxWeight, PolicyKind::StaticRho]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct HeavyTrafficConfig {
    /// `θ_j(i)`, `[user][state]`.
    pub theta: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub replicas: usize,
    /// Horizon in diffusion time.
    pub horizon: f64,
    pub grid_step: f64,
    /// Fluid initial state for the Lyapunov descent check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid_start: Option<Vec<f64>>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RdrsConfig {
    /// Euler step (default `1e−3 ×` mean holding time).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub paths: usize,
    /// Level of the two-sample KS test.
    pub alpha: f64,
    /// Probe time for the comparison (default: half the horizon).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_time: Option<f64>,
    /// Simulation replicas for the comparison.
    pub simulation_replicas: usize,
    /// Scale of the simulated system (default: largest of the ladder).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl Default for RdrsConfig {
    fn default() -> Self {
        Self { dt: None, paths: 200, alpha: 0.01, probe_time: None, simulation_replicas: 100, scale: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CapacityTraceConfig {
    /// Weight-grid steps per axis.
    pub divisions: usize,
    /// Power-split steps per axis (broadcast regions).
    pub splits: usize,
}

impl Default for CapacityTraceConfig {
    fn default() -> Self {
        Self { divisions: 20, splits: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

/// JSON schema of the document.
pub fn schema() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
}

/// Sets `path = value` in a JSON tree. `path` is dot-separated with numeric
/// components indexing arrays; `value` is parsed as JSON, falling back to a
/// plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| ConfigError::Override(assignment.into()))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(ConfigError::Override(assignment.into()));
    }
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let k: usize = part.parse().map_err(|_| invalid(path, format!("'{part}' is not an array index")))?;
                let len = items.len();
                let slot = items.get_mut(k).ok_or_else(|| invalid(path, format!("index {k} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(invalid(path, format!("'{part}' descends into a scalar"))),
        };
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses without validating.
    pub fn from_value(doc: Value) -> Result<Self, ConfigError> {
        serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse { path: if path == "." { "<root>".into() } else { path }, message: e.into_inner().to_string() }
        })
    }

    /// Parses and applies overrides, without validating.
    pub fn parse_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse { path: format!("line {}", e.line()), message: e.to_string() })?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::from_value(doc)
    }

    pub fn from_json_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let cfg = Self::parse_str(text, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file and applies overrides, without validating.
    pub fn read(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse_str(&text, overrides)
    }

    /// Reads, applies overrides, parses and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let cfg = Self::read(path, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn state_count(&self) -> usize {
        self.environment.holding_rates.len()
    }

    pub fn users(&self) -> usize {
        self.traffic.mu.len()
    }

    /// Cross-field checks; builds every model object once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let k = self.state_count();
        let j = self.users();
        if j == 0 {
            return Err(invalid("traffic.mu", "at least one user is required"));
        }
        let gen = self.generator()?;
        if self.environment.initial_state >= k {
            return Err(invalid("environment.initial_state", format!("must be below the state count {k}")));
        }
        let region = self.capacity_region()?;
        if region.users() != j {
            return Err(invalid("region", format!("describes {} users but traffic.mu has {j}", region.users())));
        }
        let _ = gen;
        self.utility_family()?.validate().map_err(|e| invalid("utility", e.to_string()))?;
        check_matrix("traffic.arrival_scv", &self.traffic.arrival_scv, j, k, |v| v > 0.0)?;
        if let Some(l) = &self.traffic.arrival_rates {
            check_matrix("traffic.arrival_rates", l, j, k, |v| v >= 0.0)?;
        }
        check_vector("traffic.mu", &self.traffic.mu, j, |v| v > 0.0)?;
        check_vector("traffic.size_scv", &self.traffic.size_scv, j, |v| v > 0.0)?;

        let s = &self.simulation;
        positive("simulation.horizon", s.horizon)?;
        positive("simulation.grid_step", s.grid_step)?;
        if s.grid_step > s.horizon {
            return Err(invalid("simulation.grid_step", "must not exceed the horizon"));
        }
        if let Some(r) = s.scale {
            positive("simulation.scale", r)?;
        }

        let h = &self.heavy_traffic;
        check_matrix("heavy_traffic.theta", &h.theta, j, k, |_| true)?;
        if h.scales.is_empty() {
            return Err(invalid("heavy_traffic.scales", "at least one scale is required"));
        }
        for (n, &r) in h.scales.iter().enumerate() {
            positive(&format!("heavy_traffic.scales[{n}]"), r)?;
        }
        if h.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("heavy_traffic.scales", "must be strictly increasing"));
        }
        if h.replicas == 0 {
            return Err(invalid("heavy_traffic.replicas", "must be positive"));
        }
        positive("heavy_traffic.horizon", h.horizon)?;
        positive("heavy_traffic.grid_step", h.grid_step)?;
        if h.grid_step > h.horizon {
            return Err(invalid("heavy_traffic.grid_step", "must not exceed the horizon"));
        }
        if let Some(f) = &h.fluid_start {
            check_vector("heavy_traffic.fluid_start", f, j, |v| v >= 0.0)?;
        }
        if h.policies.is_empty() {
            return Err(invalid("heavy_traffic.policies", "at least one policy is required"));
        }

        let r = &self.rdrs;
        if let Some(dt) = r.dt {
            positive("rdrs.dt", dt)?;
        }
        if r.paths == 0 {
            return Err(invalid("rdrs.paths", "must be positive"));
        }
        if r.simulation_replicas == 0 {
            return Err(invalid("rdrs.simulation_replicas", "must be positive"));
        }
        if !(r.alpha > 0.0 && r.alpha < 1.0) {
            return Err(invalid("rdrs.alpha", "must lie in (0, 1)"));
        }
        if let Some(t) = r.probe_time {
            if !(t > 0.0 && t <= h.horizon) {
                return Err(invalid("rdrs.probe_time", "must lie in (0, heavy_traffic.horizon]"));
            }
        }
        if let Some(sc) = r.scale {
            positive("rdrs.scale", sc)?;
        }
        if self.capacity_trace.divisions == 0 {
            return Err(invalid("capacity_trace.divisions", "must be positive"));
        }
        if self.capacity_trace.splits == 0 {
            return Err(invalid("capacity_trace.splits", "must be positive"));
        }
        if self.output.directory.is_empty() {
            return Err(invalid("output.directory", "must not be empty"));
        }
        Ok(())
    }

    pub fn generator(&self) -> Result<EnvGenerator, ConfigError> {
        markov_env::build_generator(&self.environment.holding_rates, &self.environment.embedded).map_err(|e| invalid("environment", e.to_string()))
    }

    /// Channels of MIMO region kinds.
    pub fn channel_set(&self) -> Result<Option<ChannelSet>, ConfigError> {
        let states = match &self.region {
            RegionConfig::Mac2 { gains, .. } => {
                let g: Vec<Vec<Complex64>> = gains.iter().map(|s| s.iter().map(|c| c.value()).collect()).collect();
                return ChannelSet::scalar(&g).map(Some).map_err(|e| invalid("region.gains", e.to_string()));
            }
            RegionConfig::Bc2 { channels, .. } | RegionConfig::MimoMac { channels, .. } => channels,
            _ => return Ok(None),
        };
        let mats = states
            .iter()
            .enumerate()
            .map(|(i, s)| s.iter().enumerate().map(|(j, m)| m.to_matrix(&format!("region.channels[{i}][{j}]"))).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        ChannelSet::new(mats).map(Some).map_err(|e| invalid("region.channels", e.to_string()))
    }

    pub fn capacity_region(&self) -> Result<CapacityRegion, ConfigError> {
        let k = self.state_count();
        let per_state = |field: &str, n: usize| if n == k { Ok(()) } else { Err(invalid(field, format!("has {n} states, environment has {k}"))) };
        let region = match &self.region {
            RegionConfig::Simplex { users, sum_capacity } => {
                per_state("region.sum_capacity", sum_capacity.len())?;
                CapacityRegion::simplex(*users, sum_capacity).map_err(|e| invalid("region", e.to_string()))?
            }
            RegionConfig::Mac2 { powers, gains } => {
                per_state("region.gains", gains.len())?;
                let ch = self.channel_set()?.expect("channel region");
                mimo::mac_region(&ch, powers).map_err(|e| invalid("region", e.to_string()))?
            }
            RegionConfig::Bc2 { total_power, channels, divisions } => {
                per_state("region.channels", channels.len())?;
                let ch = self.channel_set()?.expect("channel region");
                if ch.user_antennas() != 1 {
                    return Err(invalid("region.channels", "broadcast regions need one receive antenna per user"));
                }
                mimo::bc_region(&ch, *total_power, *divisions).map_err(|e| invalid("region", e.to_string()))?
            }
            RegionConfig::MimoMac { powers, channels, divisions } => {
                per_state("region.channels", channels.len())?;
                let ch = self.channel_set()?.expect("channel region");
                mimo::mimo_mac_region(&ch, powers, *divisions).map_err(|e| invalid("region", e.to_string()))?
            }
            RegionConfig::Custom { family } => match family {
                CustomFamily::DiskSimplex { users, radius, sum_capacity } => {
                    per_state("region.family.radius", radius.len())?;
                    per_state("region.family.sum_capacity", sum_capacity.len())?;
                    let states = radius.iter().zip(sum_capacity).map(|(&r, &c)| capacity::disk_simplex(*users, r, c)).collect();
                    CapacityRegion::new(*users, states).map_err(|e| invalid("region", e.to_string()))?
                }
                CustomFamily::Ellipse { axes } => {
                    per_state("region.family.axes", axes.len())?;
                    let users = axes.first().map_or(0, |a| a.len());
                    CapacityRegion::new(users, axes.iter().map(|a| capacity::ellipse(a)).collect()).map_err(|e| invalid("region", e.to_string()))?
                }
            },
        };
        if region.state_count() != k {
            return Err(invalid("region", format!("has {} states, environment has {k}", region.state_count())));
        }
        Ok(region)
    }

    pub fn utility_family(&self) -> Result<UtilityFamily, ConfigError> {
        let j = self.users();
        match &self.utility {
            UtilityConfig::LinearLog { weights } => {
                check_vector("utility.weights", weights, j, |v| v > 0.0)?;
                Ok(UtilityFamily::linear_log(weights))
            }
            UtilityConfig::Power { beta, alpha } => {
                positive("utility.beta", *beta)?;
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(invalid("utility.alpha", "must lie in (0, 1)"));
                }
                let u = UtilityFamily::power(j, *beta, *alpha);
                debug_assert!(matches!(u.rate, RateUtility::Power { .. }));
                Ok(u)
            }
        }
    }

    pub fn heavy_traffic_spec(&self, region: &CapacityRegion) -> Result<HeavyTrafficSpec, ConfigError> {
        let h = &self.heavy_traffic;
        let lambda = heavy_traffic::nominal_rates(region, &self.traffic.mu).map_err(|e| invalid("region", e.to_string()))?;
        let spec = HeavyTrafficSpec {
            lambda,
            theta: h.theta.clone(),
            arrival_scv: self.traffic.arrival_scv.clone(),
            mu: self.traffic.mu.clone(),
            size_scv: self.traffic.size_scv.clone(),
            scales: h.scales.clone(),
            replicas: h.replicas,
            horizon: h.horizon,
            grid_step: h.grid_step,
        };
        spec.validate().map_err(|e| invalid("heavy_traffic", e.to_string()))?;
        Ok(spec)
    }

    /// Traffic of the `simulate` subcommand.
    pub fn simulation_traffic(&self, region: &CapacityRegion) -> Result<TrafficSpec, ConfigError> {
        match &self.traffic.arrival_rates {
            Some(rates) => Ok(TrafficSpec {
                arrival_rates: rates.clone(),
                arrival_scv: self.traffic.arrival_scv.clone(),
                mu: self.traffic.mu.clone(),
                size_scv: self.traffic.size_scv.clone(),
            }),
            None => {
                let spec = self.heavy_traffic_spec(region)?;
                let r = self.simulation.scale.unwrap_or(*spec.scales.last().expect("validated"));
                spec.traffic_at(r).map_err(|e| invalid("simulation.scale", e.to_string()))
            }
        }
    }

    pub fn rdrs_spec(&self, region: &CapacityRegion) -> Result<RdrsSpec, ConfigError> {
        let spec = self.heavy_traffic_spec(region)?;
        Ok(RdrsSpec::from_heavy_traffic(&spec, &self.generator()?, self.rdrs.dt))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn check_vector(field: &str, v: &[f64], len: usize, ok: impl Fn(f64) -> bool) -> Result<(), ConfigError> {
    if v.len() != len {
        return Err(invalid(field, format!("has {} entries, expected {len}", v.len())));
    }
    if let Some(n) = v.iter().position(|&x| !x.is_finite() || !ok(x)) {
        return Err(invalid(format!("{field}[{n}]"), format!("value {} is out of range", v[n])));
    }
    Ok(())
}

fn check_matrix(field: &str, m: &[Vec<f64>], users: usize, states: usize, ok: impl Fn(f64) -> bool + Copy) -> Result<(), ConfigError> {
    if m.len() != users {
        return Err(invalid(field, format!("has {} rows, expected one per user ({users})", m.len())));
    }
    for (j, row) in m.iter().enumerate() {
        check_vector(&format!("{field}[{j}]"), row, states, ok)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_set_nested_values() {
        let mut doc = json!({"a": {"b": [1, 2]}, "c": "x"});
        apply_override(&mut doc, "a.b.1=5").unwrap();
        apply_override(&mut doc, "c=hello").unwrap();
        apply_override(&mut doc, "d.e=true").unwrap();
        assert_eq!(doc, json!({"a": {"b": [1, 5]}, "c": "hello", "d": {"e": true}}));
        assert!(apply_override(&mut doc, "a.b.7=1").is_err());
        assert!(apply_override(&mut doc, "novalue").is_err());
    }

    #[test]
    fn complex_values() {
        let v: Vec<ComplexValue> = serde_json::from_value(json!([1.5, [0.5, -2.0]])).unwrap();
        assert_eq!(v[0].value(), Complex64::new(1.5, 0.0));
        assert_eq!(v[1].value(), Complex64::new(0.5, -2.0));
    }
}
