//! Multi-antenna uplink (MAC) and downlink (BC) capacity regions.
//!
//! Channels are stored as downlink matrices `H_j` of shape `N×M`; the
//! uplink matrix of user `j` is `H_j†`, so the receive covariance at the base
//! station is `I + Σ_j H_j† Γ_j H_j` with `Γ_j` of shape `N×N`. A broadcast
//! region is the union of its dual uplink regions over all power splits,
//! which for a fixed weight vector is the same as an uplink problem with one
//! shared power budget.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::capacity::{CapacityError, CapacityRegion, Facet, StateRegion};

pub type CMatrix = DMatrix<Complex64>;

/// Stopping threshold for the boundary program.
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-7;
const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum MimoError {
    #[error("channel dimensions: {0}")]
    Dimension(String),
    #[error("power {value} for {what} must be positive and finite")]
    BadPower { what: String, value: f64 },
    #[error("state {state} out of range (have {count})")]
    BadState { state: usize, count: usize },
    #[error("invalid priority vector: {0}")]
    BadPriority(String),
    #[error("invalid covariance profile: {0}")]
    BadProfile(String),
    #[error("scalar region construction needs single-antenna users, got N = {0}")]
    NotScalar(usize),
    #[error("weights tie at users {a} and {b}; smoothness holds only within a facet")]
    PriorityTie { a: usize, b: usize },
    #[error("matrix inside log-det is not positive definite")]
    NotPositiveDefinite,
    #[error("boundary program stopped after {iterations} iterations with residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("empty grid")]
    EmptyGrid,
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// Downlink matrices for every environment state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    base_antennas: usize,
    user_antennas: usize,
    /// `states[i][j]` is `H_j(i)`.
    states: Vec<Vec<CMatrix>>,
}

impl ChannelSet {
    pub fn new(states: Vec<Vec<CMatrix>>) -> Result<Self, MimoError> {
        let first = states.first().and_then(|s| s.first()).ok_or_else(|| MimoError::Dimension("no channels".into()))?;
        let (n, m) = first.shape();
        let users = states[0].len();
        if n == 0 || m == 0 {
            return Err(MimoError::Dimension("antenna counts must be positive".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if s.len() != users {
                return Err(MimoError::Dimension(format!("state {i} has {} users, expected {users}", s.len())));
            }
            for (j, h) in s.iter().enumerate() {
                if h.shape() != (n, m) {
                    return Err(MimoError::Dimension(format!("H_{j}({i}) is {:?}, expected ({n}, {m})", h.shape())));
                }
                if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(MimoError::Dimension(format!("H_{j}({i}) has non-finite entries")));
                }
            }
        }
        Ok(Self { base_antennas: m, user_antennas: n, states })
    }

    /// Scalar channels `h_j(i)` (one antenna everywhere).
    pub fn scalar(gains: &[Vec<Complex64>]) -> Result<Self, MimoError> {
        Self::new(gains.iter().map(|s| s.iter().map(|&h| CMatrix::from_element(1, 1, h)).collect()).collect())
    }

    pub fn users(&self) -> usize {
        self.states[0].len()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn base_antennas(&self) -> usize {
        self.base_antennas
    }

    pub fn user_antennas(&self) -> usize {
        self.user_antennas
    }

    pub fn state(&self, i: usize) -> Result<&[CMatrix], MimoError> {
        self.states.get(i).map(|v| v.as_slice()).ok_or(MimoError::BadState { state: i, count: self.states.len() })
    }
}

/// Transmit covariances `Γ_j`, one per user.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceProfile {
    pub gammas: Vec<CMatrix>,
}

impl CovarianceProfile {
    pub fn zero(users: usize, n: usize) -> Self {
        Self { gammas: vec![CMatrix::zeros(n, n); users] }
    }

    /// `Γ_j = (P_j / N) I`.
    pub fn isotropic(powers: &[f64], n: usize) -> Self {
        Self { gammas: powers.iter().map(|&p| CMatrix::identity(n, n) * Complex64::from(p / n as f64)).collect() }
    }

    pub fn traces(&self) -> Vec<f64> {
        self.gammas.iter().map(|g| g.trace().re).collect()
    }

    /// Hermitian, PSD and within the per-user budgets.
    pub fn validate(&self, powers: &[f64]) -> Result<(), MimoError> {
        if powers.len() != self.gammas.len() {
            return Err(MimoError::BadProfile(format!("{} covariances for {} budgets", self.gammas.len(), powers.len())));
        }
        for (j, (g, &p)) in self.gammas.iter().zip(powers).enumerate() {
            if !g.is_square() {
                return Err(MimoError::BadProfile(format!("Γ_{j} is not square")));
            }
            let asym = (g - g.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if asym > 1e-10 {
                return Err(MimoError::BadProfile(format!("Γ_{j} is not Hermitian ({asym:e})")));
            }
            let min_eig = hermitian_eigen(g).0.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_eig < -1e-10 {
                return Err(MimoError::BadProfile(format!("Γ_{j} has eigenvalue {min_eig:e}")));
            }
            if g.trace().re > p + 1e-8 {
                return Err(MimoError::BadProfile(format!("Tr Γ_{j} = {} exceeds {p}", g.trace().re)));
            }
        }
        Ok(())
    }
}

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorityVector(Vec<f64>);

impl PriorityVector {
    pub fn new(nu: Vec<f64>) -> Result<Self, MimoError> {
        if nu.is_empty() {
            return Err(MimoError::BadPriority("empty".into()));
        }
        if nu.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(MimoError::BadPriority(format!("{nu:?} has a negative or non-finite component")));
        }
        let s: f64 = nu.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(MimoError::BadPriority(format!("components sum to {s}")));
        }
        Ok(Self(nu))
    }

    /// Rescales non-negative weights to sum one.
    pub fn normalized(weights: &[f64]) -> Result<Self, MimoError> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(MimoError::BadPriority(format!("{weights:?} has no positive mass")));
        }
        Self::new(weights.iter().map(|w| w / s).collect())
    }

    pub fn uniform(users: usize) -> Self {
        Self(vec![1.0 / users as f64; users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_descending(&self) -> bool {
        self.0.windows(2).all(|w| w[0] >= w[1])
    }

    /// Users in decreasing weight, ties kept in index order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx
    }

    /// `ν̃_j = ν_j − ν_{j+1}`, `ν̃_J = ν_J`, in the given order.
    pub fn differences(&self) -> Vec<f64> {
        let n = self.0.len();
        (0..n).map(|j| self.0[j] - if j + 1 < n { self.0[j + 1] } else { 0.0 }).collect()
    }
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (a + a.adjoint()) * Complex64::from(0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// `log|A|` for Hermitian positive definite `A`.
pub fn log_det(a: &CMatrix) -> Result<f64, MimoError> {
    let sym = (a + a.adjoint()) * Complex64::from(0.5);
    let chol = sym.cholesky().ok_or(MimoError::NotPositiveDefinite)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>())
}

fn received(h: &CMatrix, g: &CMatrix) -> CMatrix {
    h.adjoint() * g * h
}

/// `Z_k = I + Σ_{l ≤ k} H_{o(l)}† Γ_{o(l)} H_{o(l)}` for each prefix of `order`.
fn prefix_covariances(hs: &[CMatrix], profile: &CovarianceProfile, order: &[usize]) -> Vec<CMatrix> {
    let m = hs[0].ncols();
    let mut acc = CMatrix::identity(m, m);
    order
        .iter()
        .map(|&j| {
            acc += received(&hs[j], &profile.gammas[j]);
            acc.clone()
        })
        .collect()
}

fn check_inputs(hs: &[CMatrix], nu: &PriorityVector, profile: &CovarianceProfile) -> Result<(), MimoError> {
    if nu.len() != hs.len() {
        return Err(MimoError::BadPriority(format!("{} weights for {} users", nu.len(), hs.len())));
    }
    if profile.gammas.len() != hs.len() || profile.gammas.iter().any(|g| g.shape() != (hs[0].nrows(), hs[0].nrows())) {
        return Err(MimoError::BadProfile("covariance shapes do not match the channels".into()));
    }
    Ok(())
}

fn sorted_weights(nu: &PriorityVector) -> (Vec<usize>, Vec<f64>) {
    let order = nu.order();
    let sorted = PriorityVector(order.iter().map(|&j| nu.0[j]).collect());
    (order, sorted.differences())
}

fn objective(hs: &[CMatrix], profile: &CovarianceProfile, order: &[usize], diffs: &[f64]) -> Result<f64, MimoError> {
    let zs = prefix_covariances(hs, profile, order);
    let mut f = 0.0;
    for (z, &d) in zs.iter().zip(diffs) {
        if d != 0.0 {
            f += d * log_det(z)?;
        }
    }
    Ok(f)
}

/// `f(Γ, ν) = Σ_j ν̃_j log|I + Σ_{l ≤ j} H_l† Γ_l H_l|` with users taken in
/// decreasing weight; for descending `ν` this is the weighted sum rate of the
/// successive-decoding point.
pub fn weighted_sum_rate(channels: &ChannelSet, state: usize, nu: &PriorityVector, profile: &CovarianceProfile) -> Result<f64, MimoError> {
    let hs = channels.state(state)?;
    check_inputs(hs, nu, profile)?;
    let (order, diffs) = sorted_weights(nu);
    objective(hs, profile, &order, &diffs)
}

/// `∂f/∂Γ_l = Σ_{k ≥ pos(l)} ν̃_k H_l Z_k^{-1} H_l†`.
fn gradient(hs: &[CMatrix], profile: &CovarianceProfile, order: &[usize], diffs: &[f64]) -> Result<Vec<CMatrix>, MimoError> {
    let zs = prefix_covariances(hs, profile, order);
    let n = hs[0].nrows();
    let mut grads = vec![CMatrix::zeros(n, n); hs.len()];
    // tail[k] = Σ_{k' ≥ k} ν̃_{k'} Z_{k'}^{-1}
    let m = hs[0].ncols();
    let mut tail = CMatrix::zeros(m, m);
    for k in (0..order.len()).rev() {
        if diffs[k] != 0.0 {
            let inv = zs[k].clone().cholesky().ok_or(MimoError::NotPositiveDefinite)?.inverse();
            tail += inv * Complex64::from(diffs[k]);
        }
        let j = order[k];
        let g = &hs[j] * &tail * hs[j].adjoint();
        grads[j] = (&g + g.adjoint()) * Complex64::from(0.5);
    }
    Ok(grads)
}

/// How transmit power is constrained.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerBudget {
    /// `Tr Γ_j ≤ P_j` (uplink).
    PerUser(Vec<f64>),
    /// `Σ_j Tr Γ_j ≤ P` (dual uplink of a broadcast channel).
    Total(f64),
}

impl PowerBudget {
    fn validate(&self, users: usize) -> Result<(), MimoError> {
        let check = |what: String, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(MimoError::BadPower { what, value: v }) };
        match self {
            PowerBudget::PerUser(p) => {
                if p.len() != users {
                    return Err(MimoError::Dimension(format!("{} powers for {users} users", p.len())));
                }
                p.iter().enumerate().try_for_each(|(j, &v)| check(format!("user {j}"), v))
            }
            PowerBudget::Total(p) => check("the base station".into(), *p),
        }
    }

    fn initial(&self, users: usize, n: usize) -> CovarianceProfile {
        match self {
            PowerBudget::PerUser(p) => CovarianceProfile::isotropic(p, n),
            PowerBudget::Total(p) => CovarianceProfile::isotropic(&vec![p / users as f64; users], n),
        }
    }
}

/// Largest `τ ≥ 0` with `Σ max(x − τ, 0) ≤ budget` (0 if already within).
fn simplex_shift(values: &[f64], budget: f64) -> f64 {
    let pos: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if pos <= budget {
        return 0.0;
    }
    let mut sorted: Vec<f64> = values.iter().cloned().filter(|v| *v > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - budget) / (k + 1) as f64;
        if t < *v {
            tau = t;
        } else {
            break;
        }
    }
    tau
}

/// Euclidean projection onto the feasible covariances.
fn project(profile: &CovarianceProfile, budget: &PowerBudget) -> CovarianceProfile {
    let eigs: Vec<(Vec<f64>, CMatrix)> = profile.gammas.iter().map(hermitian_eigen).collect();
    let taus: Vec<f64> = match budget {
        PowerBudget::PerUser(p) => eigs.iter().zip(p).map(|((l, _), &pj)| simplex_shift(l, pj)).collect(),
        PowerBudget::Total(p) => {
            let all: Vec<f64> = eigs.iter().flat_map(|(l, _)| l.iter().cloned()).collect();
            vec![simplex_shift(&all, *p); eigs.len()]
        }
    };
    let gammas = eigs
        .iter()
        .zip(taus)
        .map(|((l, v), tau)| {
            let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(l.len(), l.iter().map(|x| Complex64::from((x - tau).max(0.0)))));
            let g = v * d * v.adjoint();
            (&g + g.adjoint()) * Complex64::from(0.5)
        })
        .collect();
    CovarianceProfile { gammas }
}

fn frob_diff(a: &CovarianceProfile, b: &CovarianceProfile) -> f64 {
    a.gammas.iter().zip(&b.gammas).map(|(x, y)| (x - y).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
}

fn step(profile: &CovarianceProfile, grads: &[CMatrix], t: f64) -> CovarianceProfile {
    CovarianceProfile { gammas: profile.gammas.iter().zip(grads).map(|(g, d)| g + d * Complex64::from(t)).collect() }
}

/// A solved boundary program.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub nu: Vec<f64>,
    /// Per-user rates in the original user order.
    pub rates: Vec<f64>,
    pub profile: CovarianceProfile,
    /// `f` at the optimum, equal to `ν·c`.
    pub value: f64,
    /// Projected-gradient fixed-point residual `‖Γ − Π(Γ + ∇f)‖`.
    pub residual: f64,
    pub iterations: usize,
}

/// Maximizes `f(·, ν)` over the covariances allowed by `budget` by projected
/// gradient ascent with Armijo backtracking, then decodes per-user rates in
/// decreasing weight order.
pub fn boundary_point(channels: &ChannelSet, state: usize, nu: &PriorityVector, budget: &PowerBudget) -> Result<BoundaryPoint, MimoError> {
    let hs = channels.state(state)?;
    let users = hs.len();
    budget.validate(users)?;
    if nu.len() != users {
        return Err(MimoError::BadPriority(format!("{} weights for {users} users", nu.len())));
    }
    let (order, diffs) = sorted_weights(nu);
    let n = channels.user_antennas;
    let mut profile = project(&budget.initial(users, n), budget);
    let mut value = objective(hs, &profile, &order, &diffs)?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut t0: f64 = 1.0;
    while iterations < MAX_ITERATIONS {
        let grads = gradient(hs, &profile, &order, &diffs)?;
        residual = frob_diff(&profile, &project(&step(&profile, &grads, 1.0), budget));
        if residual < BOUNDARY_RESIDUAL_TOL {
            break;
        }
        iterations += 1;
        let mut t = t0;
        loop {
            let cand = project(&step(&profile, &grads, t), budget);
            let dist2 = frob_diff(&cand, &profile).powi(2);
            let v = objective(hs, &cand, &order, &diffs)?;
            if v >= value + 1e-4 * dist2 / t || t < 1e-12 {
                profile = cand;
                value = v;
                break;
            }
            t *= 0.5;
        }
        // start the next search from a larger step when this one was accepted at once
        t0 = if t == t0 { (2.0 * t).min(1e6) } else { t.max(1e-12) };
    }
    if residual >= BOUNDARY_RESIDUAL_TOL {
        return Err(MimoError::NonConvergence { iterations, residual });
    }
    let zs = prefix_covariances(hs, &profile, &order);
    let mut rates = vec![0.0; users];
    let mut prev = 0.0;
    for (k, &j) in order.iter().enumerate() {
        let cur = log_det(&zs[k])?;
        rates[j] = cur - prev;
        prev = cur;
    }
    Ok(BoundaryPoint { nu: nu.0.clone(), rates, profile, value, residual, iterations })
}

/// Uplink boundary point with per-user budgets `powers`.
pub fn mac_boundary_point(channels: &ChannelSet, powers: &[f64], state: usize, nu: &PriorityVector) -> Result<BoundaryPoint, MimoError> {
    boundary_point(channels, state, nu, &PowerBudget::PerUser(powers.to_vec()))
}

/// Polymatroid facets `Σ_{j∈S} c_j ≤ log|I + Σ_{j∈S} P_j H_j† H_j|` of a
/// single-antenna-user uplink in one state. The last facet is the full set.
pub fn mac_state_region(channels: &ChannelSet, powers: &[f64], state: usize) -> Result<StateRegion, MimoError> {
    if channels.user_antennas != 1 {
        return Err(MimoError::NotScalar(channels.user_antennas));
    }
    let hs = channels.state(state)?;
    let users = hs.len();
    PowerBudget::PerUser(powers.to_vec()).validate(users)?;
    if users > 20 {
        return Err(MimoError::Dimension(format!("{users} users give too many subsets")));
    }
    let m = channels.base_antennas;
    let mut facets = Vec::with_capacity((1 << users) - 1);
    for mask in 1u32..(1 << users) {
        let mut z = CMatrix::identity(m, m);
        let mut coef = vec![0.0; users];
        for j in 0..users {
            if mask & (1 << j) != 0 {
                z += received(&hs[j], &CMatrix::from_element(1, 1, Complex64::from(powers[j])));
                coef[j] = 1.0;
            }
        }
        facets.push(Facet::linear(coef, log_det(&z)?.max(0.0)));
    }
    let sum = facets.len() - 1;
    Ok(StateRegion::new(users, facets, Some(sum)))
}

/// Single-state polymatroid uplink region.
pub fn mac_region_scalar(channels: &ChannelSet, powers: &[f64], state: usize) -> Result<CapacityRegion, MimoError> {
    let s = mac_state_region(channels, powers, state)?;
    Ok(CapacityRegion::new(channels.users(), vec![s])?)
}

/// Exact polymatroid uplink regions for every state.
pub fn mac_region(channels: &ChannelSet, powers: &[f64]) -> Result<CapacityRegion, MimoError> {
    let states = (0..channels.state_count()).map(|i| mac_state_region(channels, powers, i)).collect::<Result<Vec<_>, _>>()?;
    Ok(CapacityRegion::new(channels.users(), states)?)
}

/// Non-negative integer compositions of `total` into `parts`.
pub fn simplex_grid(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(parts - 1, total - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(parts, total, &mut Vec::new(), &mut out);
    }
    out
}

/// Priority vectors on a simplex grid with `divisions` steps per axis.
pub fn priority_grid(users: usize, divisions: usize) -> Vec<PriorityVector> {
    if divisions == 0 {
        return vec![PriorityVector::uniform(users)];
    }
    simplex_grid(users, divisions)
        .into_iter()
        .map(|k| PriorityVector(k.iter().map(|&x| x as f64 / divisions as f64).collect()))
        .collect()
}

/// Outer polyhedral region `{c ≥ 0 : ν·c ≤ max_{c'} ν·c'}` over a weight grid,
/// with the sum-rate facet added explicitly. Tight at every grid tangent point.
pub fn support_state_region(channels: &ChannelSet, state: usize, budget: &PowerBudget, divisions: usize) -> Result<StateRegion, MimoError> {
    let users = channels.users();
    let grid = priority_grid(users, divisions.max(1));
    let values: Vec<f64> = grid
        .par_iter()
        .map(|nu| boundary_point(channels, state, nu, budget).map(|p| p.value))
        .collect::<Result<_, _>>()?;
    let mut facets = Vec::new();
    let uniform = PriorityVector::uniform(users);
    let mut sum_facet = None;
    for (nu, v) in grid.iter().zip(values) {
        let max = nu.0.iter().cloned().fold(0.0, f64::max);
        let coef: Vec<f64> = nu.0.iter().map(|x| x / max).collect();
        if *nu == uniform {
            sum_facet = Some(facets.len());
        }
        facets.push(Facet::linear(coef, v / max));
    }
    if sum_facet.is_none() {
        let v = boundary_point(channels, state, &uniform, budget)?.value;
        sum_facet = Some(facets.len());
        facets.push(Facet::linear(vec![1.0; users], v * users as f64));
    }
    Ok(StateRegion::new(users, facets, sum_facet))
}

/// Multi-antenna uplink regions (support-function facets on a weight grid).
pub fn mimo_mac_region(channels: &ChannelSet, powers: &[f64], divisions: usize) -> Result<CapacityRegion, MimoError> {
    let budget = PowerBudget::PerUser(powers.to_vec());
    let states = (0..channels.state_count()).map(|i| support_state_region(channels, i, &budget, divisions)).collect::<Result<Vec<_>, _>>()?;
    Ok(CapacityRegion::new(channels.users(), states)?)
}

/// Broadcast regions from uplink duality (support-function facets on a weight grid).
pub fn bc_region(channels: &ChannelSet, total_power: f64, divisions: usize) -> Result<CapacityRegion, MimoError> {
    let budget = PowerBudget::Total(total_power);
    let states = (0..channels.state_count()).map(|i| support_state_region(channels, i, &budget, divisions)).collect::<Result<Vec<_>, _>>()?;
    Ok(CapacityRegion::new(channels.users(), states)?)
}

/// Broadcast boundary points from a power-split × weight grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BcPointCloud {
    pub state: usize,
    /// Pareto-maximal points of the union.
    pub envelope: Vec<BoundaryPoint>,
    /// Every computed point with its power split.
    pub all: Vec<(Vec<f64>, BoundaryPoint)>,
    /// Largest dual uplink sum rate over the power splits.
    pub sum_capacity: f64,
}

fn dominates(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x >= y - tol) && a.iter().zip(b).any(|(x, y)| *x > y + tol)
}

/// Drops points dominated componentwise by another point.
pub fn pareto_envelope(points: &[Vec<f64>], tol: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&a| !points.iter().enumerate().any(|(b, p)| b != a && (dominates(p, &points[a], tol) || (b < a && p == &points[a]))))
        .collect()
}

/// For each split `P_j = P·k_j/splits` and each weight vector, the dual
/// uplink boundary point; then the upper envelope of their union.
pub fn bc_region_points(channels: &ChannelSet, total_power: f64, state: usize, splits: usize, nu_grid: &[PriorityVector]) -> Result<BcPointCloud, MimoError> {
    if splits == 0 || nu_grid.is_empty() {
        return Err(MimoError::EmptyGrid);
    }
    PowerBudget::Total(total_power).validate(channels.users())?;
    let users = channels.users();
    let split_list: Vec<Vec<f64>> = simplex_grid(users, splits)
        .into_iter()
        .map(|k| k.iter().map(|&x| (total_power * x as f64 / splits as f64).max(total_power * 1e-12)).collect())
        .collect();
    let uniform = PriorityVector::uniform(users);
    let jobs: Vec<(usize, Option<usize>)> =
        (0..split_list.len()).flat_map(|s| (0..nu_grid.len()).map(move |k| (s, Some(k))).chain(std::iter::once((s, None)))).collect();
    let solved: Vec<(usize, Option<usize>, BoundaryPoint)> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let nu = k.map(|k| &nu_grid[k]).unwrap_or(&uniform);
            mac_boundary_point(channels, &split_list[s], state, nu).map(|p| (s, k, p))
        })
        .collect::<Result<_, _>>()?;
    let sum_capacity = solved.iter().filter(|(_, k, _)| k.is_none()).map(|(_, _, p)| p.rates.iter().sum::<f64>()).fold(0.0, f64::max);
    let all: Vec<(Vec<f64>, BoundaryPoint)> = solved.into_iter().filter(|(_, k, _)| k.is_some()).map(|(s, _, p)| (split_list[s].clone(), p)).collect();
    let rates: Vec<Vec<f64>> = all.iter().map(|(_, p)| p.rates.clone()).collect();
    let envelope = pareto_envelope(&rates, 1e-9).into_iter().map(|i| all[i].1.clone()).collect();
    Ok(BcPointCloud { state, envelope, all, sum_capacity })
}

/// Result of perturbing the weights around `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityProbe {
    pub displacement: f64,
    /// `displacement / δ` (0 when `δ = 0`).
    pub constant: f64,
}

/// Largest `‖c(ν') − c(ν)‖` over `ν' = ν ± δ(e_a − e_b)/√2`, all pairs `a < b`.
pub fn boundary_continuity_probe(channels: &ChannelSet, state: usize, budget: &PowerBudget, nu: &PriorityVector, delta: f64) -> Result<ContinuityProbe, MimoError> {
    if !(delta >= 0.0) {
        return Err(MimoError::BadPriority("probe radius must be non-negative".into()));
    }
    let x = nu.as_slice();
    let users = x.len();
    for a in 0..users {
        for b in a + 1..users {
            if (x[a] - x[b]).abs() <= 2.0 * delta.max(1e-12) {
                return Err(MimoError::PriorityTie { a, b });
            }
        }
    }
    if x.iter().any(|&v| v <= delta) {
        return Err(MimoError::BadPriority("weights must stay positive under the perturbation".into()));
    }
    let base = boundary_point(channels, state, nu, budget)?.rates;
    let mut displacement: f64 = 0.0;
    if delta > 0.0 {
        let h = delta / std::f64::consts::SQRT_2;
        for a in 0..users {
            for b in a + 1..users {
                for sign in [1.0, -1.0] {
                    let mut y = x.to_vec();
                    y[a] += sign * h;
                    y[b] -= sign * h;
                    let c = boundary_point(channels, state, &PriorityVector::normalized(&y)?, budget)?.rates;
                    displacement = displacement.max(c.iter().zip(&base).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt());
                }
            }
        }
    }
    Ok(ContinuityProbe { displacement, constant: if delta > 0.0 { displacement / delta } else { 0.0 } })
}

/// CSV with columns `state, nu_1.., c_1.., residual`.
pub fn boundary_csv(points: &[(usize, BoundaryPoint)]) -> String {
    let users = points.first().map(|(_, p)| p.rates.len()).unwrap_or(0);
    let mut out = String::from("state");
    for j in 1..=users {
        let _ = write!(out, ",nu_{j}");
    }
    for j in 1..=users {
        let _ = write!(out, ",c_{j}");
    }
    out.push_str(",residual\n");
    for (state, p) in points {
        let _ = write!(out, "{state}");
        for v in p.nu.iter().chain(&p.rates) {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{:e}", p.residual);
    }
    out
}
