//! The scheduling policy `Λ(q, i) = argmax_{c ∈ R(i)} Σ_j Φ_j(q_j) Ψ(c_j)`.
//!
//! Users with an empty queue get rate zero and the program is solved on the
//! region with those users removed. For `q > 0` the concave program is solved
//! by the barrier solver and the result carries its KKT certificate.

use serde::Serialize;
use thiserror::Error;

use crate::capacity::{self, CapacityError, CapacityRegion, StateRegion, BOUNDARY_TOL};
use crate::solver::{self, LinearObjective, Objective, SolveError, SolverOptions};
use crate::utility::{RateUtility, UtilityFamily};

/// Certification threshold on the KKT residual.
pub const KKT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("queue vector has {got} components, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("queue length {value} of user {user} is negative or not finite")]
    BadQueue { user: usize, value: f64 },
    #[error("allocation not certified: KKT residual {residual:e}")]
    NotCertified { residual: f64 },
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub c: Vec<f64>,
    /// Facets with `h_k(c) ≥ −1e−8`.
    pub active: Vec<usize>,
    /// Multiplier of each facet of the state region.
    pub eta: Vec<f64>,
    pub residual: f64,
}

struct UtilityObjective<'a> {
    weights: Vec<f64>,
    rate: &'a RateUtility,
}

impl Objective for UtilityObjective<'_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }
    fn value(&self, c: &[f64]) -> f64 {
        self.weights.iter().zip(c).map(|(w, &x)| w * self.rate.value(x)).sum()
    }
    fn gradient(&self, c: &[f64], g: &mut [f64]) {
        for j in 0..c.len() {
            g[j] = self.weights[j] * self.rate.derivative(c[j]);
        }
    }
    fn hessian_diag(&self, c: &[f64], d: &mut [f64]) {
        for j in 0..c.len() {
            d[j] = self.weights[j] * self.rate.second_derivative(c[j]);
        }
    }
}

/// Objective `Σ_j U_j(q_j, c_j)` for the full user set (used for residuals).
struct FullObjective<'a> {
    utility: &'a UtilityFamily,
    q: &'a [f64],
}

impl Objective for FullObjective<'_> {
    fn dim(&self) -> usize {
        self.q.len()
    }
    fn value(&self, c: &[f64]) -> f64 {
        self.utility.total(self.q, c)
    }
    fn gradient(&self, c: &[f64], g: &mut [f64]) {
        for j in 0..c.len() {
            g[j] = if self.q[j] > 0.0 { self.utility.marginal(j, self.q[j], c[j]) } else { 0.0 };
        }
    }
    fn hessian_diag(&self, _c: &[f64], d: &mut [f64]) {
        d.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Reusable policy evaluator: caches, per state, the users that can never
/// receive a positive rate.
#[derive(Debug, Clone)]
pub struct Allocator<'a> {
    region: &'a CapacityRegion,
    utility: &'a UtilityFamily,
    pinned: Vec<Vec<usize>>,
    options: SolverOptions,
}

impl<'a> Allocator<'a> {
    pub fn new(region: &'a CapacityRegion, utility: &'a UtilityFamily) -> Self {
        let pinned = region.states().iter().map(capacity::pinned_users).collect();
        Self { region, utility, pinned, options: SolverOptions::default() }
    }

    pub fn region(&self) -> &CapacityRegion {
        self.region
    }

    pub fn utility(&self) -> &UtilityFamily {
        self.utility
    }

    fn check(&self, i: usize, q: &[f64]) -> Result<&StateRegion, AllocError> {
        let state = self.region.state(i)?;
        let users = self.region.users();
        if q.len() != users || self.utility.users() != users {
            return Err(AllocError::Dimension { expected: users, got: if q.len() != users { q.len() } else { self.utility.users() } });
        }
        if let Some((j, &v)) = q.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(AllocError::BadQueue { user: j, value: v });
        }
        Ok(state)
    }

    /// `Λ(q, i)` with its KKT certificate.
    pub fn allocate(&self, i: usize, q: &[f64]) -> Result<Allocation, AllocError> {
        let state = self.check(i, q)?;
        let n = q.len();
        let zero: Vec<usize> = (0..n).filter(|&j| q[j] == 0.0 || self.pinned[i].contains(&j)).collect();
        if zero.len() == n {
            return Ok(Allocation { c: vec![0.0; n], active: active_set(state, &vec![0.0; n]), eta: vec![0.0; state.facets.len()], residual: 0.0 });
        }
        let reduced = capacity::reduce_state(state, &zero)?;
        let obj = UtilityObjective {
            weights: reduced.kept.iter().map(|&j| self.utility.weights[j].value(q[j])).collect(),
            rate: &self.utility.rate,
        };
        let sol = solver::maximize(&reduced.region.facets, reduced.region.dim, &obj, &self.options)?;
        let c = reduced.embed(&sol.c);
        let mut eta = vec![0.0; state.facets.len()];
        for (k, &orig) in reduced.facet_map.iter().enumerate() {
            eta[orig] = sol.eta[k];
        }
        let residual = kkt_residual_state(state, q, &c, &eta, self.utility);
        if residual > KKT_TOL {
            return Err(AllocError::NotCertified { residual });
        }
        Ok(Allocation { active: active_set(state, &c), c, eta, residual })
    }

    /// `argmax Σ_j weights_j c_j` over `R(i)`, with `c_j = 0` wherever the weight is 0.
    pub fn maximize_linear(&self, i: usize, weights: &[f64]) -> Result<Vec<f64>, AllocError> {
        let state = self.check(i, weights)?;
        let n = weights.len();
        let zero: Vec<usize> = (0..n).filter(|&j| weights[j] == 0.0 || self.pinned[i].contains(&j)).collect();
        if zero.len() == n {
            return Ok(vec![0.0; n]);
        }
        let reduced = capacity::reduce_state(state, &zero)?;
        let obj = LinearObjective(reduced.kept.iter().map(|&j| weights[j]).collect());
        let sol = solver::maximize(&reduced.region.facets, reduced.region.dim, &obj, &self.options)?;
        Ok(reduced.embed(&sol.c))
    }
}

fn active_set(state: &StateRegion, c: &[f64]) -> Vec<usize> {
    (0..state.facets.len()).filter(|&k| state.facets[k].value(c) >= -BOUNDARY_TOL).collect()
}

/// One-shot form of [`Allocator::allocate`].
pub fn allocate(region: &CapacityRegion, i: usize, q: &[f64], utility: &UtilityFamily) -> Result<Allocation, AllocError> {
    Allocator::new(region, utility).allocate(i, q)
}

/// `max_j |c_j (∂U_j/∂c_j − Σ_k η_k ∂h_k/∂c_j)| + max_k |η_k h_k(c, i)|`.
///
/// Stationarity is written for a maximization with `η ≥ 0`, so the facet
/// gradients enter with a minus sign.
pub fn kkt_residual(region: &CapacityRegion, i: usize, q: &[f64], c: &[f64], eta: &[f64], utility: &UtilityFamily) -> Result<f64, AllocError> {
    let state = region.state(i)?;
    if c.len() != region.users() || q.len() != region.users() {
        return Err(AllocError::Dimension { expected: region.users(), got: c.len().min(q.len()) });
    }
    Ok(kkt_residual_state(state, q, c, eta, utility))
}

fn kkt_residual_state(state: &StateRegion, q: &[f64], c: &[f64], eta: &[f64], utility: &UtilityFamily) -> f64 {
    solver::kkt_residual(&state.facets, &FullObjective { utility, q }, c, eta)
}

/// Outcome of a radial-homogeneity probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneityCheck {
    pub holds: bool,
    pub discrepancy: f64,
}

/// Compares `Λ(a·q, i)` with `Λ(q, i)`.
pub fn is_radially_homogeneous(region: &CapacityRegion, i: usize, utility: &UtilityFamily, q: &[f64], a: f64) -> Result<HomogeneityCheck, AllocError> {
    let alloc = Allocator::new(region, utility);
    let base = alloc.allocate(i, q)?;
    let scaled: Vec<f64> = q.iter().map(|v| a * v).collect();
    let other = alloc.allocate(i, &scaled)?;
    let discrepancy = base.c.iter().zip(&other.c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    Ok(HomogeneityCheck { holds: discrepancy <= 1e-6, discrepancy })
}
