//! The `r`-indexed sequence of systems approaching heavy traffic, its fluid
//! and diffusion scalings, and the empirical checks built on them: fluid
//! decay, state-space collapse onto `q*(Ŵ, ρ)`, and workload comparison
//! between policies on common random numbers.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{self, CapacityError, CapacityRegion};
use crate::dual_cost::{self, DualError};
use crate::markov_env::{self, EnvError, EnvGenerator, EnvPath};
use crate::queue_sim::{self, new_cache, PolicyHandle, PolicyKind, SharedCache, SimError, SimSettings, TrafficSpec};
use crate::rng::SeedStreams;
use crate::stats::{self, Estimate};
use crate::utility::UtilityFamily;

#[derive(Debug, Error)]
pub enum HeavyTrafficError {
    #[error("invalid heavy-traffic setup: {0}")]
    Invalid(String),
    #[error("arrival rate of user {user} in state {state} is {rate} at r = {r}")]
    NonpositiveRate { user: usize, state: usize, r: f64, rate: f64 },
    #[error("trajectory covers {have} time units, scaling needs {need}")]
    HorizonTooShort { have: f64, need: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dual(#[from] DualError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// Nominal traffic and its perturbation `λʳ = λ + θ/r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTrafficSpec {
    /// `λ_j(i) = μ_j ρ_j(i)`, indexed `[user][state]`.
    pub lambda: Vec<Vec<f64>>,
    /// `θ_j(i)`, indexed `[user][state]`.
    pub theta: Vec<Vec<f64>>,
    pub arrival_scv: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub size_scv: Vec<f64>,
    /// Increasing scale ladder.
    pub scales: Vec<f64>,
    pub replicas: usize,
    /// Horizon `T` in diffusion time.
    pub horizon: f64,
    /// Sampling step in diffusion time.
    pub grid_step: f64,
}

/// `λ_j(i) = μ_j ρ_j(i)` from the balanced points of `region`.
pub fn nominal_rates(region: &CapacityRegion, mu: &[f64]) -> Result<Vec<Vec<f64>>, HeavyTrafficError> {
    let rho = capacity::balanced_points(region).map_err(|e| HeavyTrafficError::Invalid(format!("heavy traffic needs balanced nominal rates: {e}")))?;
    Ok((0..region.users()).map(|j| rho.iter().map(|r| mu[j] * r[j]).collect()).collect())
}

impl HeavyTrafficSpec {
    pub fn users(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<(), HeavyTrafficError> {
        let bad = |m: &str| Err(HeavyTrafficError::Invalid(m.into()));
        let users = self.users();
        if users == 0 || self.lambda.len() != users || self.theta.len() != users || self.arrival_scv.len() != users || self.size_scv.len() != users {
            return bad("per-user arrays must all have one entry per user");
        }
        let states = self.lambda[0].len();
        if (0..users).any(|j| self.lambda[j].len() != states || self.theta[j].len() != states || self.arrival_scv[j].len() != states) {
            return bad("per-state arrays must all have one entry per state");
        }
        if self.lambda.iter().flatten().any(|&l| !(l > 0.0)) {
            return bad("nominal arrival rates must be positive");
        }
        if self.scales.is_empty() || self.scales.iter().any(|&r| !(r > 0.0)) || self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return bad("scales must be positive and strictly increasing");
        }
        if self.replicas == 0 {
            return bad("replicas must be positive");
        }
        if !(self.horizon > 0.0) || !(self.grid_step > 0.0) || self.grid_step > self.horizon {
            return bad("horizon and grid step must be positive with grid step ≤ horizon");
        }
        for &r in &self.scales {
            self.traffic_at(r)?;
        }
        Ok(())
    }

    /// Traffic of the `r`-th system.
    pub fn traffic_at(&self, r: f64) -> Result<TrafficSpec, HeavyTrafficError> {
        let mut rates = self.lambda.clone();
        for (j, row) in rates.iter_mut().enumerate() {
            for (i, l) in row.iter_mut().enumerate() {
                *l += self.theta[j][i] / r;
                if !(*l > 0.0) {
                    return Err(HeavyTrafficError::NonpositiveRate { user: j, state: i, r, rate: *l });
                }
            }
        }
        Ok(TrafficSpec { arrival_rates: rates, arrival_scv: self.arrival_scv.clone(), mu: self.mu.clone(), size_scv: self.size_scv.clone() })
    }

    /// Diffusion-time sample points `0, δ, 2δ, …, ≤ T`.
    pub fn grid(&self) -> Vec<f64> {
        let n = (self.horizon / self.grid_step + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.grid_step).collect()
    }
}

/// One member of the sequence.
#[derive(Debug, Clone)]
pub struct ScaledSystem {
    pub r: f64,
    pub traffic: TrafficSpec,
    /// Environment generator with holding rates `γ(i)/r²`.
    pub generator: EnvGenerator,
    /// `r² T`.
    pub physical_horizon: f64,
}

pub fn build_sequence(spec: &HeavyTrafficSpec, generator: &EnvGenerator) -> Result<Vec<ScaledSystem>, HeavyTrafficError> {
    spec.validate()?;
    spec.scales
        .iter()
        .map(|&r| {
            Ok(ScaledSystem {
                r,
                traffic: spec.traffic_at(r)?,
                generator: markov_env::scale_holding(generator, r)?,
                physical_horizon: r * r * spec.horizon,
            })
        })
        .collect()
}

/// Diffusion-scaled paths `Q̂(t) = Q(r²t)/r`, `Ŵ`, `Ŷ` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPaths {
    pub r: f64,
    pub users: usize,
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    q_hat: Vec<f64>,
    pub w_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    /// Environment path in diffusion time.
    pub env: EnvPath,
}

impl ScaledPaths {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn q_hat(&self, k: usize) -> &[f64] {
        &self.q_hat[k * self.users..(k + 1) * self.users]
    }

    /// `Q̄(t) = Q(r²t)/r² = Q̂(t)/r`.
    pub fn q_bar(&self, k: usize) -> Vec<f64> {
        self.q_hat(k).iter().map(|q| q / self.r).collect()
    }

    /// Builds paths from explicit diffusion-scaled values (for synthetic checks).
    pub fn from_parts(r: f64, times: Vec<f64>, q_hat: Vec<Vec<f64>>, mu: &[f64], env: EnvPath) -> Self {
        let users = mu.len();
        let states = times.iter().map(|&t| env.state_at(t)).collect();
        let w_hat = q_hat.iter().map(|q| q.iter().zip(mu).map(|(a, m)| a / m).sum()).collect();
        let y_hat = vec![0.0; times.len()];
        Self { r, users, times, states, q_hat: q_hat.concat(), w_hat, y_hat, env }
    }
}

/// Resamples a physical trajectory at times `r² t` for `t ∈ grid`.
pub fn diffusion_scale(trajectory: &queue_sim::SystemTrajectory, r: f64, grid: &[f64]) -> Result<ScaledPaths, HeavyTrafficError> {
    let r2 = r * r;
    let need = r2 * grid.iter().cloned().fold(0.0, f64::max);
    if need > trajectory.horizon * (1.0 + 1e-12) {
        return Err(HeavyTrafficError::HorizonTooShort { have: trajectory.horizon, need });
    }
    let users = trajectory.users;
    let mut out = ScaledPaths {
        r,
        users,
        times: grid.to_vec(),
        states: Vec::with_capacity(grid.len()),
        q_hat: Vec::with_capacity(grid.len() * users),
        w_hat: Vec::with_capacity(grid.len()),
        y_hat: Vec::with_capacity(grid.len()),
        env: trajectory.env.time_compressed(r2),
    };
    let last = trajectory.len() - 1;
    for &t in grid {
        let x = r2 * t / trajectory.grid_step;
        let k = if (x - x.round()).abs() < 1e-6 { x.round() as usize } else { x.floor() as usize }.min(last);
        out.states.push(trajectory.states[k]);
        out.q_hat.extend(trajectory.queue(k).iter().map(|&q| q as f64 / r));
        out.w_hat.push(trajectory.workload[k] / r);
        out.y_hat.push(trajectory.unused[k] / r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Collapse {
    /// `sup_t ‖Q̂(t) − q*(Ŵ(t), ρ(α(t)))‖`.
    pub sup: f64,
    /// Grid average of the same deviation.
    pub avg: f64,
}

/// Distance of the scaled queue vector from the fixed-point manifold.
pub fn collapse_metric(paths: &ScaledPaths, utility: &UtilityFamily, mu: &[f64], rho: &[Vec<f64>]) -> Result<Collapse, HeavyTrafficError> {
    let mut sup: f64 = 0.0;
    let mut total = 0.0;
    for k in 0..paths.len() {
        let fp = dual_cost::fixed_point(utility, mu, paths.w_hat[k], &rho[paths.states[k]])?;
        let d = paths.q_hat(k).iter().zip(&fp.q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        sup = sup.max(d);
        total += d;
    }
    Ok(Collapse { sup, avg: if paths.is_empty() { 0.0 } else { total / paths.len() as f64 } })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidDiagnostics {
    /// `sup_t ‖Q̄(t)‖`.
    pub sup_norm: f64,
    /// `ψ(Q̄(t_k), α(t_k))` on the grid.
    pub psi: Vec<f64>,
    /// Sum of `ψ(t_{k+1}) − ψ(t_k)` over grid steps inside one holding interval.
    pub within_interval_change: f64,
}

pub fn fluid_diagnostics(paths: &ScaledPaths, utility: &UtilityFamily, mu: &[f64], rho: &[Vec<f64>]) -> FluidDiagnostics {
    let mut sup_norm: f64 = 0.0;
    let mut psi = Vec::with_capacity(paths.len());
    for k in 0..paths.len() {
        let q = paths.q_bar(k);
        sup_norm = sup_norm.max(q.iter().map(|x| x * x).sum::<f64>().sqrt());
        psi.push(dual_cost::lyapunov(utility, mu, &q, &rho[paths.states[k]]));
    }
    let mut within = 0.0;
    for k in 1..paths.len() {
        if paths.env.interval_at(paths.times[k - 1]) == paths.env.interval_at(paths.times[k]) {
            within += psi[k] - psi[k - 1];
        }
    }
    FluidDiagnostics { sup_norm, psi, within_interval_change: within }
}

/// Everything needed to run replicas of the sequence.
#[derive(Debug)]
pub struct HeavyTrafficRun<'a> {
    pub spec: &'a HeavyTrafficSpec,
    pub region: &'a CapacityRegion,
    pub utility: &'a UtilityFamily,
    /// Unscaled environment generator.
    pub generator: &'a EnvGenerator,
    pub initial_state: usize,
    pub seed: u64,
    rho: Vec<Vec<f64>>,
    caches: HashMap<PolicyKind, SharedCache>,
}

impl<'a> HeavyTrafficRun<'a> {
    pub fn new(
        spec: &'a HeavyTrafficSpec,
        region: &'a CapacityRegion,
        utility: &'a UtilityFamily,
        generator: &'a EnvGenerator,
        initial_state: usize,
        seed: u64,
    ) -> Result<Self, HeavyTrafficError> {
        spec.validate()?;
        if region.users() != spec.users() || utility.users() != spec.users() {
            return Err(HeavyTrafficError::Invalid("user counts of region, utility and traffic differ".into()));
        }
        if region.state_count() != generator.state_count() || spec.lambda[0].len() != generator.state_count() {
            return Err(HeavyTrafficError::Invalid("state counts of region, traffic and environment differ".into()));
        }
        let rho = capacity::balanced_points(region).map_err(|e| HeavyTrafficError::Invalid(format!("heavy traffic needs balanced nominal rates: {e}")))?;
        let caches = [PolicyKind::UtilityMax, PolicyKind::MaxWeight, PolicyKind::StaticRho].into_iter().map(|k| (k, new_cache())).collect();
        Ok(Self { spec, region, utility, generator, initial_state, seed, rho, caches })
    }

    pub fn rho(&self) -> &[Vec<f64>] {
        &self.rho
    }

    /// Diffusion-time environment path of one replica; the same for every
    /// scale and policy, so comparisons across them are paired.
    pub fn env_path(&self, replica: u64) -> Result<EnvPath, HeavyTrafficError> {
        Ok(markov_env::sample_path(self.generator, self.spec.horizon, self.initial_state, SeedStreams::new(self.seed).replica(replica))?)
    }

    /// One replica at scale `r`, optionally started from `Q(0) = ⌊r² q̄₀⌉`.
    pub fn replica(&self, r: f64, policy: PolicyKind, replica: u64, fluid_start: Option<&[f64]>) -> Result<ScaledPaths, HeavyTrafficError> {
        let traffic = self.spec.traffic_at(r)?;
        let r2 = r * r;
        // stretching a path of the base generator by r² gives a path of the generator with rates γ/r²
        let env = self.env_path(replica)?.time_compressed(1.0 / r2);
        let mut handle = PolicyHandle::with_cache(policy, self.region, self.utility, &self.spec.mu, self.caches[&policy].clone())?;
        let settings = SimSettings::new(r2 * self.spec.horizon, r2 * self.spec.grid_step);
        let init: Option<Vec<u32>> = fluid_start.map(|q| q.iter().map(|x| (x * r2).round().max(0.0) as u32).collect());
        let traj = queue_sim::simulate_from(&traffic, &mut handle, &env, settings, SeedStreams::new(self.seed).replica(replica), init.as_deref())?;
        diffusion_scale(&traj, r, &self.spec.grid())
    }

    /// Per-replica rows of the sweep over the scale ladder.
    pub fn sweep(&self, policy: PolicyKind) -> Result<Vec<SweepRow>, HeavyTrafficError> {
        let jobs: Vec<(f64, u64)> = self.spec.scales.iter().flat_map(|&r| (0..self.spec.replicas as u64).map(move |s| (r, s))).collect();
        jobs.par_iter()
            .map(|&(r, seed)| {
                let paths = self.replica(r, policy, seed, None)?;
                let c = collapse_metric(&paths, self.utility, &self.spec.mu, &self.rho)?;
                let f = fluid_diagnostics(&paths, self.utility, &self.spec.mu, &self.rho);
                Ok(SweepRow {
                    r,
                    seed,
                    policy: policy.name().to_string(),
                    sup_collapse: c.sup,
                    avg_collapse: c.avg,
                    avg_w: stats::mean(&paths.w_hat),
                    sup_fluid: f.sup_norm,
                })
            })
            .collect()
    }

    /// Within-interval change of `ψ` per replica at scale `r`, started from the fluid state `q̄₀`.
    pub fn fluid_descent(&self, r: f64, fluid_start: &[f64]) -> Result<Vec<f64>, HeavyTrafficError> {
        (0..self.spec.replicas as u64)
            .into_par_iter()
            .map(|s| {
                let paths = self.replica(r, PolicyKind::UtilityMax, s, Some(fluid_start))?;
                Ok(fluid_diagnostics(&paths, self.utility, &self.spec.mu, &self.rho).within_interval_change)
            })
            .collect()
    }

    /// Paired comparison of time-averaged `Ŵ` at scale `r` against utility-max.
    pub fn workload_comparison(&self, r: f64, policies: &[PolicyKind]) -> Result<WorkloadComparison, HeavyTrafficError> {
        if !policies.contains(&PolicyKind::UtilityMax) || policies.len() < 2 {
            return Err(HeavyTrafficError::Invalid("compare at least two policies, one of them utility-max".into()));
        }
        let seeds = self.spec.replicas as u64;
        let jobs: Vec<(PolicyKind, u64)> = policies.iter().flat_map(|&p| (0..seeds).map(move |s| (p, s))).collect();
        let avgs: Vec<f64> = jobs
            .par_iter()
            .map(|&(p, s)| self.replica(r, p, s, None).map(|paths| stats::mean(&paths.w_hat)))
            .collect::<Result<_, _>>()?;
        let per = |p: PolicyKind| -> Vec<f64> { jobs.iter().zip(&avgs).filter(|((q, _), _)| *q == p).map(|(_, &a)| a).collect() };
        let base = per(PolicyKind::UtilityMax);
        let rows = policies
            .iter()
            .map(|&p| {
                let w = per(p);
                let diff: Vec<f64> = w.iter().zip(&base).map(|(a, b)| a - b).collect();
                PolicyWorkload { policy: p.name().to_string(), avg_w: stats::estimate(&w), diff_vs_utility_max: stats::estimate(&diff) }
            })
            .collect();
        Ok(WorkloadComparison { r, seeds: seeds as usize, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub seed: u64,
    pub policy: String,
    pub sup_collapse: f64,
    pub avg_collapse: f64,
    pub avg_w: f64,
    pub sup_fluid: f64,
}

/// Columns `r, seed, policy, sup-collapse, avg-collapse, avg-W, sup-fluid-norm`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("r,seed,policy,sup-collapse,avg-collapse,avg-W,sup-fluid-norm\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", row.r, row.seed, row.policy, row.sup_collapse, row.avg_collapse, row.avg_w, row.sup_fluid);
    }
    out
}

/// Seed averages of a sweep column per scale, in ladder order.
pub fn per_scale(rows: &[SweepRow], column: impl Fn(&SweepRow) -> f64) -> Vec<(f64, Estimate)> {
    let mut scales: Vec<f64> = rows.iter().map(|r| r.r).collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    scales
        .into_iter()
        .map(|r| {
            let xs: Vec<f64> = rows.iter().filter(|row| row.r == r).map(&column).collect();
            (r, stats::estimate(&xs))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyWorkload {
    pub policy: String,
    pub avg_w: Estimate,
    /// Paired difference of this policy's average `Ŵ` minus utility-max's.
    pub diff_vs_utility_max: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadComparison {
    pub r: f64,
    pub seeds: usize,
    pub rows: Vec<PolicyWorkload>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> HeavyTrafficSpec {
        HeavyTrafficSpec {
            lambda: vec![vec![1.0]],
            theta: vec![vec![-0.5]],
            arrival_scv: vec![vec![1.0]],
            mu: vec![1.0],
            size_scv: vec![1.0],
            scales: vec![10.0],
            replicas: 1,
            horizon: 1.0,
            grid_step: 0.1,
        }
    }

    #[test]
    fn sequence_rates() {
        let s = spec();
        assert!((s.traffic_at(10.0).unwrap().arrival_rates[0][0] - 0.95).abs() < 1e-15);
        let mut z = s.clone();
        z.theta = vec![vec![0.0]];
        assert_eq!(z.traffic_at(3.0).unwrap().arrival_rates[0][0], 1.0);
        for r in [2.0, 7.0, 1000.0] {
            let l = s.traffic_at(r).unwrap().arrival_rates[0][0];
            assert!((r * (l - 1.0) + 0.5).abs() < 1e-9);
        }
        let mut bad = s.clone();
        bad.scales = vec![0.25];
        assert!(matches!(bad.validate(), Err(HeavyTrafficError::NonpositiveRate { .. })));
        let g = markov_env::build_generator(&[2.0], &[vec![0.0]]).unwrap();
        let seq = build_sequence(&s, &g).unwrap();
        assert_eq!(seq[0].physical_horizon, 100.0);
        assert!((seq[0].generator.holding_rates()[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn synthetic_collapse_is_zero() {
        let u = UtilityFamily::linear_log(&[1.0, 1.0]);
        let mu = [1.0, 2.0];
        let rho = vec![vec![1.0, 1.0]];
        let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let q: Vec<Vec<f64>> = times.iter().map(|t| dual_cost::fixed_point(&u, &mu, 3.0 * t, &rho[0]).unwrap().q).collect();
        let p = ScaledPaths::from_parts(4.0, times, q, &mu, EnvPath::constant(0, 1.0));
        let c = collapse_metric(&p, &u, &mu, &rho).unwrap();
        assert!(c.sup < 1e-9);
    }

    #[test]
    fn single_user_collapse_is_zero() {
        let u = UtilityFamily::linear_log(&[1.0]);
        let mu = [2.0];
        let times: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let q: Vec<Vec<f64>> = vec![vec![0.0], vec![1.5], vec![0.25], vec![3.0], vec![0.0]];
        let p = ScaledPaths::from_parts(8.0, times, q, &mu, EnvPath::constant(0, 4.0));
        assert!(collapse_metric(&p, &u, &mu, &[vec![0.7]]).unwrap().sup < 1e-9);
    }

    #[test]
    fn empty_fluid() {
        let u = UtilityFamily::linear_log(&[1.0, 1.0]);
        let p = ScaledPaths::from_parts(4.0, vec![0.0, 1.0], vec![vec![0.0, 0.0]; 2], &[1.0, 1.0], EnvPath::constant(0, 1.0));
        let f = fluid_diagnostics(&p, &u, &[1.0, 1.0], &[vec![1.0, 1.0]]);
        assert_eq!(f.sup_norm, 0.0);
        assert!(f.psi.iter().all(|&x| x == 0.0));
    }
}
