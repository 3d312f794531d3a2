//! Subcommand runners. Each writes its artifacts, a copy of the exact config,
//! and a `manifest.json` into one output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::allocator::Allocator;
use crate::capacity::CapacityRegion;
use crate::config::{ConfigError, ExperimentConfig, OutputFormat, RegionConfig};
use crate::heavy_traffic::{self, HeavyTrafficRun, PolicyWorkload, SweepRow};
use crate::markov_env::{self, EnvGenerator};
use crate::mimo;
use crate::queue_sim::{self, PolicyHandle, PolicyKind, SimSettings};
use crate::rdrs::{self, Comparison};
use crate::rng::SeedStreams;
use crate::stats::{self, Estimate};
use crate::utility::UtilityFamily;

/// Offset mixed into the root seed for limit-model ensembles, so their
/// environment draws are independent of the simulated replicas.
pub const RDRS_SEED_SALT: u64 = 0x5244_5253_0000_0001;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl ExperimentError {
    /// 1 for validation failures, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Runtime(e.to_string())
}

/// Model objects built once from a validated config.
#[derive(Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub generator: EnvGenerator,
    pub region: CapacityRegion,
    pub utility: UtilityFamily,
}

impl Prepared {
    pub fn new(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let generator = config.generator()?;
        let region = config.capacity_region()?;
        let utility = config.utility_family()?;
        Ok(Self { config, generator, region, utility })
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// How every random stream is derived from the root seed.
    pub streams: Vec<String>,
    /// Artifact file name → SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Collects artifacts of one run and writes the manifest last.
#[derive(Debug)]
pub struct ArtifactDir {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl ArtifactDir {
    pub fn create(dir: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::Io { path: dir.display().to_string(), message: e.to_string() })?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: BTreeMap::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| ExperimentError::Io { path: path.display().to_string(), message: e.to_string() })?;
        self.artifacts.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, command: &str, config: &ExperimentConfig) -> Result<Manifest, ExperimentError> {
        let config_text = config.to_json() + "\n";
        self.write("config.json", &config_text)?;
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_sha256: sha256_hex(config_text.as_bytes()),
            streams: vec![
                "ChaCha8 keyed by splitmix64(seed ^ splitmix64(replica)), stream = purpose << 32 | user".into(),
                "purposes: environment=1, arrivals=2, packet-sizes=3, diffusion=4, probe=5".into(),
                "simulated replica k uses replica index k of the root seed at every scale and policy".into(),
                format!("limit-model path k uses replica index k of seed ^ {RDRS_SEED_SALT:#x}"),
            ],
            artifacts: self.artifacts.clone(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| ExperimentError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok(manifest)
    }
}

fn csv(cfg: &ExperimentConfig) -> bool {
    cfg.output.wants(OutputFormat::Csv)
}

/// One trajectory of the physical system.
pub fn run_simulate(p: &Prepared, out: &Path) -> Result<serde_json::Value, ExperimentError> {
    let cfg = &p.config;
    let traffic = cfg.simulation_traffic(&p.region)?;
    // heavy-traffic rates come with the environment slowed by r²
    let generator = match cfg.traffic.arrival_rates {
        Some(_) => p.generator.clone(),
        None => {
            let r = cfg.simulation.scale.unwrap_or(*cfg.heavy_traffic.scales.last().expect("validated"));
            markov_env::scale_holding(&p.generator, r).map_err(runtime)?
        }
    };
    let s = &cfg.simulation;
    let seed = SeedStreams::new(cfg.seed);
    let env = markov_env::sample_path(&generator, s.horizon, cfg.environment.initial_state, seed).map_err(runtime)?;
    let mut policy = PolicyHandle::new(s.policy, &p.region, &p.utility, &traffic.mu).map_err(runtime)?;
    let settings = SimSettings { horizon: s.horizon, grid_step: s.grid_step, record_events: s.record_events };
    let traj = queue_sim::simulate(&traffic, &mut policy, &env, settings, seed).map_err(runtime)?;

    let mut dir = ArtifactDir::create(out)?;
    if csv(cfg) {
        dir.write("trajectory.csv", &traj.to_csv())?;
    }
    if s.record_events {
        dir.write("events.jsonl", &traj.events_jsonl())?;
    }
    let summary = json!({
        "policy": s.policy.name(),
        "horizon": s.horizon,
        "arrivals": traj.arrivals,
        "departures": traj.departures,
        "mean_queue": traj.queue_area.iter().map(|a| a / s.horizon).collect::<Vec<_>>(),
        "mean_workload": stats::mean(&traj.workload),
        "final_unused_capacity": traj.unused.last().copied().unwrap_or(0.0),
        "max_rate_violation": traj.max_violation,
        "environment_jumps": env.jump_count(),
    });
    dir.write_json("summary.json", &summary)?;
    dir.finish("simulate", cfg)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleSummary {
    pub r: f64,
    pub sup_collapse: Estimate,
    pub avg_collapse: Estimate,
    pub avg_w: Estimate,
    pub sup_fluid: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub policies: BTreeMap<String, Vec<ScaleSummary>>,
    /// Paired workload comparison at the largest scale.
    pub workload: Option<Vec<PolicyWorkload>>,
    /// Within-interval change of the Lyapunov function from `fluid_start`, largest scale.
    pub fluid_descent: Option<Estimate>,
}

/// Seed averages of every sweep column, per scale.
pub fn summarize_scales(rows: &[SweepRow]) -> Vec<ScaleSummary> {
    let col = |f: fn(&SweepRow) -> f64| heavy_traffic::per_scale(rows, f);
    let (sc, ac, w, fl) = (col(|r| r.sup_collapse), col(|r| r.avg_collapse), col(|r| r.avg_w), col(|r| r.sup_fluid));
    (0..sc.len()).map(|k| ScaleSummary { r: sc[k].0, sup_collapse: sc[k].1, avg_collapse: ac[k].1, avg_w: w[k].1, sup_fluid: fl[k].1 }).collect()
}

/// Paired `avg Ŵ` differences against utility-max at scale `r`, from sweep rows.
pub fn paired_workload(rows: &[SweepRow], r: f64) -> Option<Vec<PolicyWorkload>> {
    let at = |policy: &str| -> BTreeMap<u64, f64> { rows.iter().filter(|x| x.r == r && x.policy == policy).map(|x| (x.seed, x.avg_w)).collect() };
    let base = at(PolicyKind::UtilityMax.name());
    if base.is_empty() {
        return None;
    }
    let mut names: Vec<&str> = rows.iter().map(|x| x.policy.as_str()).collect();
    names.dedup();
    let out: Vec<PolicyWorkload> = names
        .into_iter()
        .map(|name| {
            let w = at(name);
            let diff: Vec<f64> = w.iter().filter_map(|(s, a)| base.get(s).map(|b| a - b)).collect();
            PolicyWorkload { policy: name.to_string(), avg_w: stats::estimate(&w.values().copied().collect::<Vec<_>>()), diff_vs_utility_max: stats::estimate(&diff) }
        })
        .collect();
    (out.len() > 1).then_some(out)
}

/// Heavy-traffic ladder for every configured policy.
pub fn run_sweep(p: &Prepared, out: &Path) -> Result<SweepSummary, ExperimentError> {
    let cfg = &p.config;
    let spec = cfg.heavy_traffic_spec(&p.region)?;
    let run = HeavyTrafficRun::new(&spec, &p.region, &p.utility, &p.generator, cfg.environment.initial_state, cfg.seed).map_err(runtime)?;
    let mut rows = Vec::new();
    let mut policies = BTreeMap::new();
    for &policy in &cfg.heavy_traffic.policies {
        let r = run.sweep(policy).map_err(runtime)?;
        policies.insert(policy.name().to_string(), summarize_scales(&r));
        rows.extend(r);
    }
    let r_max = *spec.scales.last().expect("validated");
    let fluid_descent = match &cfg.heavy_traffic.fluid_start {
        Some(q0) => Some(stats::estimate(&run.fluid_descent(r_max, q0).map_err(runtime)?)),
        None => None,
    };
    let summary = SweepSummary { policies, workload: paired_workload(&rows, r_max), fluid_descent };
    let mut dir = ArtifactDir::create(out)?;
    if csv(cfg) {
        dir.write("sweep.csv", &heavy_traffic::sweep_csv(&rows))?;
    }
    dir.write_json("summary.json", &summary)?;
    dir.finish("sweep", cfg)?;
    Ok(summary)
}

fn rdrs_values(p: &Prepared, t_probe: f64) -> Result<(Vec<rdrs::RdrsPath>, Vec<f64>), ExperimentError> {
    let cfg = &p.config;
    let spec = cfg.rdrs_spec(&p.region)?;
    let paths = rdrs::ensemble(&spec, &p.generator, cfg.environment.initial_state, cfg.seed ^ RDRS_SEED_SALT, cfg.rdrs.paths).map_err(runtime)?;
    let values = paths.iter().map(|path| path.w_at(t_probe)).collect();
    Ok((paths, values))
}

fn probe_time(cfg: &ExperimentConfig) -> f64 {
    cfg.rdrs.probe_time.unwrap_or(cfg.heavy_traffic.horizon / 2.0)
}

fn samples_csv(name: &str, values: &[f64]) -> String {
    let mut out = format!("path,{name}\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

/// Limit-model ensemble; writes the first path (with its lifted queues) and
/// the ensemble values at the probe time.
pub fn run_rdrs(p: &Prepared, out: &Path) -> Result<serde_json::Value, ExperimentError> {
    let cfg = &p.config;
    let t = probe_time(cfg);
    let (paths, values) = rdrs_values(p, t)?;
    let rho = crate::capacity::balanced_points(&p.region).map_err(runtime)?;
    let lifted = rdrs::lift_to_queues(&paths[0], &p.utility, &cfg.traffic.mu, &rho).map_err(runtime)?;
    let averages: Vec<f64> = paths.iter().map(|x| x.w_time_average).collect();
    let complementarity = paths.iter().all(|x| x.checks.complementarity_holds());
    let mut dir = ArtifactDir::create(out)?;
    if csv(cfg) {
        dir.write("rdrs_path0.csv", &paths[0].to_csv(Some(&lifted)))?;
        dir.write("rdrs_samples.csv", &samples_csv("W", &values))?;
    }
    let summary = json!({
        "paths": paths.len(),
        "probe_time": t,
        "w_at_probe": rdrs::SampleMoments::of(&values),
        "w_time_average": stats::estimate(&averages),
        "complementarity_holds": complementarity,
        "min_w": paths.iter().map(|x| x.checks.min_w).fold(f64::INFINITY, f64::min),
        "max_y_decrease": paths.iter().map(|x| x.checks.max_y_decrease).fold(0.0, f64::max),
    });
    dir.write_json("summary.json", &summary)?;
    dir.finish("rdrs", cfg)?;
    Ok(summary)
}

/// `Ŵ(t)` of scaled utility-max replicas, read off the output grid.
pub fn simulated_workload_at(run: &HeavyTrafficRun<'_>, r: f64, replicas: usize, t: f64) -> Result<Vec<f64>, ExperimentError> {
    use rayon::prelude::*;
    let k = (t / run.spec.grid_step).round() as usize;
    (0..replicas as u64)
        .into_par_iter()
        .map(|s| {
            let paths = run.replica(r, PolicyKind::UtilityMax, s, None).map_err(runtime)?;
            Ok(paths.w_hat[k.min(paths.w_hat.len() - 1)])
        })
        .collect()
}

/// Scaled simulation against the limit model at the probe time.
pub fn run_compare(p: &Prepared, out: &Path) -> Result<Comparison, ExperimentError> {
    let cfg = &p.config;
    let t = probe_time(cfg);
    let (_, diffusion) = rdrs_values(p, t)?;
    let spec = cfg.heavy_traffic_spec(&p.region)?;
    let run = HeavyTrafficRun::new(&spec, &p.region, &p.utility, &p.generator, cfg.environment.initial_state, cfg.seed).map_err(runtime)?;
    let r = cfg.rdrs.scale.unwrap_or(*spec.scales.last().expect("validated"));
    let simulation = simulated_workload_at(&run, r, cfg.rdrs.simulation_replicas, t)?;
    let cmp = rdrs::compare_with_min(&diffusion, &simulation, t, cfg.rdrs.alpha, 1).map_err(runtime)?;
    let mut dir = ArtifactDir::create(out)?;
    if csv(cfg) {
        dir.write("rdrs_samples.csv", &samples_csv("W", &diffusion))?;
        dir.write("simulation_samples.csv", &samples_csv("W", &simulation))?;
    }
    dir.write_json("summary.json", &json!({ "r": r, "comparison": &cmp }))?;
    dir.finish("compare", cfg)?;
    Ok(cmp)
}

/// Boundary points over the weight grid for every state. Channel regions
/// are traced by the covariance optimizer; other kinds by linear maximization
/// over the stored facets.
pub fn run_capacity_trace(p: &Prepared, out: &Path) -> Result<serde_json::Value, ExperimentError> {
    let cfg = &p.config;
    let users = p.region.users();
    let grid = mimo::priority_grid(users, cfg.capacity_trace.divisions);
    let mut dir = ArtifactDir::create(out)?;
    let mut sum_capacity = Vec::new();
    let channels = cfg.channel_set()?;
    match (&cfg.region, channels) {
        (RegionConfig::Bc2 { total_power, .. }, Some(ch)) => {
            let mut envelope = Vec::new();
            let mut cloud = String::from("state,split,nu,c\n");
            for i in 0..ch.state_count() {
                let pc = mimo::bc_region_points(&ch, *total_power, i, cfg.capacity_trace.splits, &grid).map_err(runtime)?;
                sum_capacity.push(pc.sum_capacity);
                for (split, pt) in &pc.all {
                    let _ = writeln!(cloud, "{i},{},{},{}", join(split), join(&pt.nu), join(&pt.rates));
                }
                envelope.extend(pc.envelope.into_iter().map(|pt| (i, pt)));
            }
            if csv(cfg) {
                dir.write("boundary.csv", &mimo::boundary_csv(&envelope))?;
                dir.write("bc_points.csv", &cloud)?;
            }
        }
        (RegionConfig::Mac2 { powers, .. } | RegionConfig::MimoMac { powers, .. }, Some(ch)) => {
            let mut points = Vec::new();
            for i in 0..ch.state_count() {
                for nu in &grid {
                    points.push((i, mimo::mac_boundary_point(&ch, powers, i, nu).map_err(runtime)?));
                }
                sum_capacity.push(crate::capacity::sum_capacity(&p.region, i).map_err(runtime)?);
            }
            if csv(cfg) {
                dir.write("boundary.csv", &mimo::boundary_csv(&points))?;
            }
        }
        _ => {
            let alloc = Allocator::new(&p.region, &p.utility);
            let mut text = String::from("state");
            for j in 1..=users {
                let _ = write!(text, ",nu_{j}");
            }
            for j in 1..=users {
                let _ = write!(text, ",c_{j}");
            }
            text.push_str(",residual\n");
            for i in 0..p.region.state_count() {
                for nu in &grid {
                    let c = alloc.maximize_linear(i, nu.as_slice()).map_err(runtime)?;
                    let _ = writeln!(text, "{i},{},{},0e0", join(nu.as_slice()), join(&c));
                }
                sum_capacity.push(crate::capacity::sum_capacity(&p.region, i).map_err(runtime)?);
            }
            if csv(cfg) {
                dir.write("boundary.csv", &text)?;
            }
        }
    }
    let summary = json!({ "weights": grid.len(), "states": p.region.state_count(), "sum_capacity": sum_capacity });
    dir.write_json("summary.json", &summary)?;
    dir.finish("capacity-trace", cfg)?;
    Ok(summary)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}
