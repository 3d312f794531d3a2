//! Costs induced by a utility family and the workload-constrained
//! minimizer `q*(w, ρ)` that the scheduling policy steers toward.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::allocator::{AllocError, Allocator};
use crate::capacity::{self, CapacityError, CapacityRegion};
use crate::rng::{Purpose, SeedStreams};
use crate::utility::UtilityFamily;

/// Default workload floor for probes near the fixed point.
pub const WORKLOAD_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DualError {
    #[error("expected {expected} components, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// `C_j(q_j, c_j) = Ψ'(c_j) ∫₀^{q_j} Φ_j / μ_j`.
pub fn cost(utility: &UtilityFamily, mu: &[f64], j: usize, q: f64, c: f64) -> f64 {
    utility.rate.derivative(c) * utility.weights[j].integral(q) / mu[j]
}

/// `∂C_j/∂q_j = Φ_j(q_j) Ψ'(c_j) / μ_j`.
pub fn cost_derivative(utility: &UtilityFamily, mu: &[f64], j: usize, q: f64, c: f64) -> f64 {
    utility.weights[j].value(q) * utility.rate.derivative(c) / mu[j]
}

/// `V(q, c) = Σ_j C_j(q_j, c_j)`.
pub fn total_cost(utility: &UtilityFamily, mu: &[f64], q: &[f64], c: &[f64]) -> f64 {
    (0..q.len()).map(|j| cost(utility, mu, j, q[j], c[j])).sum()
}

/// `ψ(q, i) = V(q, ρ(i))`.
pub fn lyapunov(utility: &UtilityFamily, mu: &[f64], q: &[f64], rho: &[f64]) -> f64 {
    total_cost(utility, mu, q, rho)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub q: Vec<f64>,
    pub theta: f64,
    pub workload: f64,
}

fn check_dims(utility: &UtilityFamily, mu: &[f64], rho: &[f64]) -> Result<(), DualError> {
    let n = utility.users();
    for v in [mu.len(), rho.len()] {
        if v != n {
            return Err(DualError::Dimension { expected: n, got: v });
        }
    }
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(DualError::Invalid("service rates must be positive".into()));
    }
    if rho.iter().any(|&r| !(r > 0.0)) {
        return Err(DualError::Invalid("balanced rates must be positive".into()));
    }
    Ok(())
}

/// Minimizer of `V(·, ρ)` over `{q ≥ 0 : Σ_j q_j/μ_j ≥ w}`.
///
/// Stationarity gives `Φ_j(q_j) Ψ'(ρ_j) = θ`, so `q_j(θ)` is monotone in `θ`
/// and `θ` is found by bisection on the workload constraint.
pub fn fixed_point(utility: &UtilityFamily, mu: &[f64], w: f64, rho: &[f64]) -> Result<FixedPoint, DualError> {
    check_dims(utility, mu, rho)?;
    if !(w >= 0.0) || !w.is_finite() {
        return Err(DualError::Invalid(format!("workload {w} must be finite and non-negative")));
    }
    let n = utility.users();
    if w == 0.0 {
        return Ok(FixedPoint { q: vec![0.0; n], theta: 0.0, workload: 0.0 });
    }
    let slopes: Vec<f64> = rho.iter().map(|&r| utility.rate.derivative(r)).collect();
    let q_of = |theta: f64| -> Vec<f64> { (0..n).map(|j| utility.weights[j].inverse(theta / slopes[j])).collect() };
    let load = |q: &[f64]| -> f64 { q.iter().zip(mu).map(|(x, m)| x / m).sum() };
    let mut hi = 1.0;
    while load(&q_of(hi)) < w {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if load(&q_of(mid)) < w {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut q = q_of(theta);
    // remove the residual bisection error so the constraint is tight
    let scale = w / load(&q);
    if (scale - 1.0).abs() < 1e-8 {
        q.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(FixedPoint { q, theta, workload: w })
}

/// `‖Λ(q*(w, ρ(i)), i) − ρ(i)‖`: the policy should return the balanced rates
/// at the cost minimizer.
pub fn duality_roundtrip(region: &CapacityRegion, i: usize, utility: &UtilityFamily, mu: &[f64], w: f64) -> Result<f64, DualError> {
    if !(w > 0.0) {
        return Err(DualError::Invalid("round trip needs a positive workload".into()));
    }
    let rho = capacity::balanced_point(region, i)?.rates;
    let fp = fixed_point(utility, mu, w, &rho)?;
    let c = Allocator::new(region, utility).allocate(i, &fp.q)?.c;
    Ok(c.iter().zip(&rho).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilizationProbe {
    /// Largest `|Σ Λ_j(q) − Σ ρ_j|` over the probes.
    pub gap: f64,
    pub samples: usize,
    pub radius: f64,
}

/// Samples `q` uniformly in the ball of radius `radius` around
/// `q*(w, ρ(i))`, clipped to `q ≥ 0` and with workload at least `floor`,
/// and reports the worst sum-rate gap of the policy against `Σ ρ(i)`.
#[allow(clippy::too_many_arguments)]
pub fn full_utilization_check(
    region: &CapacityRegion,
    i: usize,
    utility: &UtilityFamily,
    mu: &[f64],
    w: f64,
    radius: f64,
    samples: usize,
    floor: f64,
    seed: SeedStreams,
) -> Result<UtilizationProbe, DualError> {
    if !(w >= floor) {
        return Err(DualError::Invalid(format!("workload {w} is below the floor {floor}")));
    }
    if !(radius >= 0.0) {
        return Err(DualError::Invalid("probe radius must be non-negative".into()));
    }
    let rho = capacity::balanced_point(region, i)?.rates;
    let target: f64 = rho.iter().sum();
    let fp = fixed_point(utility, mu, w, &rho)?;
    let alloc = Allocator::new(region, utility);
    let n = rho.len();
    let mut rng = seed.rng(Purpose::Probe, 0);
    let gap_at = |q: &[f64]| -> Result<f64, DualError> { Ok((alloc.allocate(i, q)?.c.iter().sum::<f64>() - target).abs()) };
    let mut gap = gap_at(&fp.q)?;
    let mut taken = 0;
    let mut attempts = 0;
    while taken < samples && radius > 0.0 {
        attempts += 1;
        if attempts > 100 * samples.max(1) {
            return Err(DualError::Invalid("could not draw probes above the workload floor".into()));
        }
        let dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let len = radius * rng.random::<f64>().powf(1.0 / n as f64);
        let q: Vec<f64> = (0..n).map(|j| (fp.q[j] + len * dir[j] / norm).max(0.0)).collect();
        let load: f64 = q.iter().zip(mu).map(|(x, m)| x / m).sum();
        if load < floor {
            continue;
        }
        gap = gap.max(gap_at(&q)?);
        taken += 1;
    }
    Ok(UtilizationProbe { gap, samples: taken, radius })
}
