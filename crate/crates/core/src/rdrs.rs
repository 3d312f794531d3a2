//! The limiting workload process: a one-dimensional reflected diffusion
//! whose drift and volatility switch with the environment, simulated by
//! Euler–Maruyama with a discrete Skorohod map, and its lift to queue space.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual_cost::{self, DualError};
use crate::heavy_traffic::HeavyTrafficSpec;
use crate::markov_env::{self, EnvError, EnvGenerator, EnvPath};
use crate::rng::{Purpose, SeedStreams};
use crate::stats;
use crate::utility::UtilityFamily;

/// Smallest ensemble accepted by [`compare_to_simulation`].
pub const MIN_ENSEMBLE: usize = 100;

#[derive(Debug, Error)]
pub enum RdrsError {
    #[error("invalid diffusion setup: {0}")]
    Invalid(String),
    #[error("ensemble of {got} paths is below the minimum of {min}")]
    EnsembleTooSmall { got: usize, min: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dual(#[from] DualError),
}

/// Coefficients of `dX̂ = Σ_j (θ_j dt + dH^E_j + dH^S_j) / μ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdrsSpec {
    /// `θ_j(i)`, `[user][state]`.
    pub theta: Vec<Vec<f64>>,
    /// `Γ^E_jj(i) = λ_j(i) α_j²(i)`, `[user][state]`.
    pub gamma_e: Vec<Vec<f64>>,
    /// `Γ^S_jj(i) = λ_j(i) β_j²`, `[user][state]`.
    pub gamma_s: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    /// Euler step.
    pub dt: f64,
    pub horizon: f64,
    /// Spacing of recorded samples (every step when `None`).
    pub output_step: Option<f64>,
    /// Apply the Skorohod map (off gives the free process `X̂`).
    pub reflect: bool,
}

impl RdrsSpec {
    /// Coefficients matching a heavy-traffic sequence, with the default step
    /// `1e−3 ×` the mean holding time of `generator` unless `dt` is given.
    pub fn from_heavy_traffic(spec: &HeavyTrafficSpec, generator: &EnvGenerator, dt: Option<f64>) -> Self {
        let users = spec.users();
        let states = spec.lambda[0].len();
        let gamma_e = (0..users).map(|j| (0..states).map(|i| spec.lambda[j][i] * spec.arrival_scv[j][i]).collect()).collect();
        let gamma_s = (0..users).map(|j| (0..states).map(|i| spec.lambda[j][i] * spec.size_scv[j]).collect()).collect();
        Self {
            theta: spec.theta.clone(),
            gamma_e,
            gamma_s,
            mu: spec.mu.clone(),
            dt: dt.unwrap_or(1e-3 * generator.mean_holding_time()),
            horizon: spec.horizon,
            output_step: Some(spec.grid_step),
            reflect: true,
        }
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }

    pub fn states(&self) -> usize {
        self.theta.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<(), RdrsError> {
        let bad = |m: &str| Err(RdrsError::Invalid(m.into()));
        let users = self.users();
        if users == 0 || self.theta.len() != users || self.gamma_e.len() != users || self.gamma_s.len() != users {
            return bad("per-user arrays must have one entry per user");
        }
        let k = self.states();
        if k == 0 || (0..users).any(|j| self.theta[j].len() != k || self.gamma_e[j].len() != k || self.gamma_s[j].len() != k) {
            return bad("per-state arrays must have one entry per state");
        }
        if self.gamma_e.iter().chain(&self.gamma_s).flatten().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return bad("diffusion coefficients must be non-negative");
        }
        if self.theta.iter().flatten().any(|t| !t.is_finite()) {
            return bad("drifts must be finite");
        }
        if self.mu.iter().any(|&m| !(m > 0.0)) {
            return bad("service rates must be positive");
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || self.output_step.is_some_and(|s| !(s > 0.0)) {
            return bad("step, horizon and output step must be positive");
        }
        Ok(())
    }

    /// `Σ_j θ_j(i)/μ_j`.
    pub fn drift(&self, i: usize) -> f64 {
        (0..self.users()).map(|j| self.theta[j][i] / self.mu[j]).sum()
    }

    /// `Σ_j (Γ^E_jj(i) + Γ^S_jj(i))/μ_j²`.
    pub fn variance(&self, i: usize) -> f64 {
        (0..self.users()).map(|j| (self.gamma_e[j][i] + self.gamma_s[j][i]) / (self.mu[j] * self.mu[j])).sum()
    }
}

/// Pathwise checks gathered at every Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathChecks {
    pub steps: usize,
    pub min_w: f64,
    /// Largest `Ŵ_k` at a step where `Ŷ` increased.
    pub max_w_on_push: f64,
    /// Largest decrease of `Ŷ` over one step (0 when nondecreasing).
    pub max_y_decrease: f64,
    /// `2 ×` the largest one-step standard deviation.
    pub reflect_tol: f64,
}

impl PathChecks {
    pub fn complementarity_holds(&self) -> bool {
        self.min_w >= -1e-12 && self.max_y_decrease == 0.0 && self.max_w_on_push <= self.reflect_tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdrsPath {
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    /// `(1/T) ∫₀ᵀ Ŵ dt` from every Euler step (left endpoints).
    pub w_time_average: f64,
    pub checks: PathChecks,
}

impl RdrsPath {
    /// Value of `Ŵ` at the recorded sample nearest to `t`.
    pub fn w_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return self.w[0];
        }
        if k == self.times.len() || (t - self.times[k - 1]).abs() <= (self.times[k] - t).abs() {
            self.w[k - 1]
        } else {
            self.w[k]
        }
    }

    /// Columns `time, state, X, Y, W` and `Q_1..` when `lifted` is given.
    pub fn to_csv(&self, lifted: Option<&[Vec<f64>]>) -> String {
        let mut out = String::from("time,state,X,Y,W");
        if let Some(q) = lifted {
            for j in 1..=q.first().map_or(0, |v| v.len()) {
                let _ = write!(out, ",Q_{j}");
            }
        }
        out.push('\n');
        for k in 0..self.times.len() {
            let _ = write!(out, "{},{},{},{},{}", self.times[k], self.states[k], self.x[k], self.y[k], self.w[k]);
            if let Some(q) = lifted {
                for v in &q[k] {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Euler–Maruyama with the step grid refined so that every environment jump
/// and every output time is a step endpoint. Coefficients are taken at the
/// left endpoint of each step.
pub fn simulate_rdrs(spec: &RdrsSpec, env: &EnvPath, seed: SeedStreams) -> Result<RdrsPath, RdrsError> {
    spec.validate()?;
    if env.horizon() < spec.horizon * (1.0 - 1e-12) {
        return Err(RdrsError::Invalid(format!("environment path ends at {} before the horizon {}", env.horizon(), spec.horizon)));
    }
    if env.states().iter().any(|&s| s >= spec.states()) {
        return Err(RdrsError::Invalid("environment visits a state without coefficients".into()));
    }
    let users = spec.users();
    let mut e_rng: Vec<_> = (0..users as u64).map(|j| seed.rng(Purpose::Diffusion, 2 * j)).collect();
    let mut s_rng: Vec<_> = (0..users as u64).map(|j| seed.rng(Purpose::Diffusion, 2 * j + 1)).collect();
    let drift: Vec<f64> = (0..spec.states()).map(|i| spec.drift(i)).collect();
    let e_scale: Vec<Vec<f64>> = (0..spec.states()).map(|i| (0..users).map(|j| spec.gamma_e[j][i].sqrt() / spec.mu[j]).collect()).collect();
    let s_scale: Vec<Vec<f64>> = (0..spec.states()).map(|i| (0..users).map(|j| spec.gamma_s[j][i].sqrt() / spec.mu[j]).collect()).collect();
    let max_sd = (0..spec.states()).map(|i| spec.variance(i)).fold(0.0, f64::max).sqrt() * spec.dt.sqrt();

    let jumps = env.jump_times();
    let mut interval = 0;
    let mut state = env.states()[0];
    let mut next_jump = jumps.get(1).copied().unwrap_or(f64::INFINITY);
    let out_step = spec.output_step.unwrap_or(0.0);
    let mut next_out = 1usize;
    let out_time = |n: usize| if out_step > 0.0 { n as f64 * out_step } else { f64::INFINITY };

    let (mut t, mut x, mut y) = (0.0f64, 0.0f64, 0.0f64);
    let mut path = RdrsPath {
        times: vec![0.0],
        states: vec![state],
        x: vec![0.0],
        y: vec![0.0],
        w: vec![0.0],
        w_time_average: 0.0,
        checks: PathChecks { steps: 0, min_w: 0.0, max_w_on_push: 0.0, max_y_decrease: 0.0, reflect_tol: 2.0 * max_sd },
    };
    let mut w_integral = 0.0;
    while t < spec.horizon {
        let mut t1 = (t + spec.dt).min(spec.horizon);
        let o = out_time(next_out);
        if o < t1 - 1e-12 * spec.dt {
            t1 = o;
        }
        if next_jump < t1 - 1e-12 * spec.dt {
            t1 = next_jump;
        }
        // snap to an output time or jump within rounding
        if (t1 - o).abs() <= 1e-9 * spec.dt {
            t1 = o.min(spec.horizon);
        }
        let h = t1 - t;
        let sq = h.sqrt();
        let mut dx = drift[state] * h;
        for j in 0..users {
            let ze: f64 = e_rng[j].sample(StandardNormal);
            let zs: f64 = s_rng[j].sample(StandardNormal);
            dx += sq * (e_scale[state][j] * ze + s_scale[state][j] * zs);
        }
        w_integral += (x + y) * h;
        x += dx;
        let y_prev = y;
        if spec.reflect {
            y = y.max(-x);
        }
        let w = x + y;
        let c = &mut path.checks;
        c.steps += 1;
        c.min_w = c.min_w.min(w);
        c.max_y_decrease = c.max_y_decrease.max(y_prev - y);
        if y > y_prev {
            c.max_w_on_push = c.max_w_on_push.max(w);
        }
        t = t1;
        if (t - o).abs() <= 1e-9 * spec.dt {
            next_out += 1;
        }
        while t >= next_jump - 1e-12 * spec.dt {
            interval += 1;
            state = env.states()[interval];
            next_jump = jumps.get(interval + 1).copied().unwrap_or(f64::INFINITY);
        }
        let record = out_step == 0.0 || (t - out_time(next_out - 1)).abs() <= 1e-9 * spec.dt || t >= spec.horizon;
        if record && path.times.last() != Some(&t) {
            path.times.push(t);
            path.states.push(state);
            path.x.push(x);
            path.y.push(y);
            path.w.push(w);
        }
    }
    path.w_time_average = w_integral / spec.horizon;
    Ok(path)
}

/// Independent paths, each with its own environment draw.
pub fn ensemble(spec: &RdrsSpec, generator: &EnvGenerator, initial_state: usize, root: u64, paths: usize) -> Result<Vec<RdrsPath>, RdrsError> {
    (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let seed = SeedStreams::new(root).replica(p);
            let env = markov_env::sample_path(generator, spec.horizon, initial_state, seed)?;
            simulate_rdrs(spec, &env, seed)
        })
        .collect()
}

/// `Q̂(t_k) = q*(Ŵ(t_k), ρ(α(t_k)))`.
pub fn lift_to_queues(path: &RdrsPath, utility: &UtilityFamily, mu: &[f64], rho: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, RdrsError> {
    path.w
        .iter()
        .zip(&path.states)
        .map(|(&w, &i)| Ok(dual_cost::fixed_point(utility, mu, w.max(0.0), &rho[i])?.q))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleMoments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SampleMoments {
    pub fn of(xs: &[f64]) -> Self {
        Self { n: xs.len(), mean: stats::mean(xs), variance: stats::variance(xs) }
    }
}

/// Distributional comparison of `Ŵ(t_probe)` between two ensembles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub t_probe: f64,
    pub diffusion: SampleMoments,
    pub simulation: SampleMoments,
    pub ks: f64,
    pub alpha: f64,
    pub critical: f64,
    pub below_critical: bool,
}

/// Two-sample KS test at level `alpha` between the diffusion values and the
/// scaled-simulation values of `Ŵ(t_probe)`.
pub fn compare_to_simulation(diffusion: &[f64], simulation: &[f64], t_probe: f64, alpha: f64) -> Result<Comparison, RdrsError> {
    compare_with_min(diffusion, simulation, t_probe, alpha, MIN_ENSEMBLE)
}

/// [`compare_to_simulation`] with an explicit minimum ensemble size.
pub fn compare_with_min(diffusion: &[f64], simulation: &[f64], t_probe: f64, alpha: f64, min: usize) -> Result<Comparison, RdrsError> {
    for n in [diffusion.len(), simulation.len()] {
        if n < min {
            return Err(RdrsError::EnsembleTooSmall { got: n, min });
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(RdrsError::Invalid(format!("level {alpha} must lie in (0, 1)")));
    }
    let ks = stats::ks_statistic(diffusion, simulation);
    let critical = stats::ks_critical(alpha, diffusion.len(), simulation.len());
    Ok(Comparison {
        t_probe,
        diffusion: SampleMoments::of(diffusion),
        simulation: SampleMoments::of(simulation),
        ks,
        alpha,
        critical,
        below_critical: ks < critical,
    })
}
