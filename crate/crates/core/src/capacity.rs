//! Per-state convex capacity regions `R(i) = {c ≥ 0 : h_k(c, i) ≤ 0 ∀k}`.
//!
//! Regions are intensional: each state carries a list of smooth convex facet
//! functions with analytic gradients and Hessians. One facet may be flagged
//! as the sum-capacity facet `Σ_j c_j − C_U`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::solver::{self, LinearObjective, SolveError, SolverOptions};

/// Tolerance separating interior, boundary and outside.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("rate vector has {got} components, region has {expected} users")]
    Dimension { expected: usize, got: usize },
    #[error("state {state} outside 0..{count}")]
    BadState { state: usize, count: usize },
    #[error("balanced point infeasible in state {state}: C_U/J = {share} violates facet {facet} by {violation:e}")]
    BalancedPointInfeasible { state: usize, share: f64, facet: usize, violation: f64 },
    #[error("cannot remove every user from the region")]
    EmptyReduction,
    #[error("user index {0} out of range")]
    BadUser(usize),
    #[error("facet count overflows 64-bit integers for J = {0}")]
    Overflow(usize),
    #[error("J must be at least 1")]
    NoUsers,
    #[error("region invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] SolveError),
}

/// User-supplied smooth convex facet.
pub trait SmoothFacet: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, c: &[f64]) -> f64;
    fn gradient(&self, c: &[f64], g: &mut [f64]);
    /// Row-major `n × n` Hessian. Defaults to central differences of the gradient.
    fn hessian(&self, c: &[f64], h: &mut [f64]) {
        let n = self.dim();
        let mut x = c.to_vec();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for l in 0..n {
            let step = 1e-6 * (1.0 + c[l].abs());
            x[l] = c[l] + step;
            self.gradient(&x, &mut gp);
            x[l] = c[l] - step;
            self.gradient(&x, &mut gm);
            x[l] = c[l];
            for m in 0..n {
                h[m * n + l] = (gp[m] - gm[m]) / (2.0 * step);
            }
        }
        for a in 0..n {
            for b in 0..a {
                let s = 0.5 * (h[a * n + b] + h[b * n + a]);
                h[a * n + b] = s;
                h[b * n + a] = s;
            }
        }
    }
}

/// A facet function `h(c)`; the region keeps `h(c) ≤ 0`.
#[derive(Debug, Clone)]
pub enum Facet {
    /// `a·c − b`
    Linear { coef: Vec<f64>, bound: f64 },
    /// `½ cᵀAc + bᵀc − d`, `A` symmetric PSD stored row-major.
    Quadratic { matrix: Vec<f64>, linear: Vec<f64>, offset: f64 },
    /// `h(c / factor)`: the inner region stretched by `factor`.
    Scaled { inner: Box<Facet>, factor: f64 },
    /// `h` evaluated with the coordinates outside `kept` pinned to zero.
    Restricted { inner: Box<Facet>, kept: Vec<usize>, full_dim: usize },
    Custom(Arc<dyn SmoothFacet>),
}

impl Facet {
    pub fn linear(coef: Vec<f64>, bound: f64) -> Self {
        Facet::Linear { coef, bound }
    }

    /// `Σ_j c_j − C_U`.
    pub fn sum(dim: usize, sum_capacity: f64) -> Self {
        Facet::Linear { coef: vec![1.0; dim], bound: sum_capacity }
    }

    pub fn dim(&self) -> usize {
        match self {
            Facet::Linear { coef, .. } => coef.len(),
            Facet::Quadratic { linear, .. } => linear.len(),
            Facet::Scaled { inner, .. } => inner.dim(),
            Facet::Restricted { kept, .. } => kept.len(),
            Facet::Custom(f) => f.dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        match self {
            Facet::Linear { .. } => true,
            Facet::Scaled { inner, .. } | Facet::Restricted { inner, .. } => inner.is_linear(),
            _ => false,
        }
    }

    pub fn value(&self, c: &[f64]) -> f64 {
        match self {
            Facet::Linear { coef, bound } => dot(coef, c) - bound,
            Facet::Quadratic { matrix, linear, offset } => {
                let n = linear.len();
                let mut quad = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        quad += c[a] * matrix[a * n + b] * c[b];
                    }
                }
                0.5 * quad + dot(linear, c) - offset
            }
            Facet::Scaled { inner, factor } => {
                let x: Vec<f64> = c.iter().map(|v| v / factor).collect();
                inner.value(&x)
            }
            Facet::Restricted { inner, kept, full_dim } => inner.value(&embed(c, kept, *full_dim)),
            Facet::Custom(f) => f.value(c),
        }
    }

    pub fn gradient(&self, c: &[f64], g: &mut [f64]) {
        match self {
            Facet::Linear { coef, .. } => g.copy_from_slice(coef),
            Facet::Quadratic { matrix, linear, .. } => {
                let n = linear.len();
                for a in 0..n {
                    g[a] = linear[a] + (0..n).map(|b| matrix[a * n + b] * c[b]).sum::<f64>();
                }
            }
            Facet::Scaled { inner, factor } => {
                let x: Vec<f64> = c.iter().map(|v| v / factor).collect();
                inner.gradient(&x, g);
                g.iter_mut().for_each(|v| *v /= factor);
            }
            Facet::Restricted { inner, kept, full_dim } => {
                let mut full = vec![0.0; *full_dim];
                inner.gradient(&embed(c, kept, *full_dim), &mut full);
                for (slot, &k) in g.iter_mut().zip(kept) {
                    *slot = full[k];
                }
            }
            Facet::Custom(f) => f.gradient(c, g),
        }
    }

    pub fn hessian(&self, c: &[f64], h: &mut [f64]) {
        match self {
            Facet::Linear { .. } => h.iter_mut().for_each(|v| *v = 0.0),
            Facet::Quadratic { matrix, .. } => h.copy_from_slice(matrix),
            Facet::Scaled { inner, factor } => {
                let x: Vec<f64> = c.iter().map(|v| v / factor).collect();
                inner.hessian(&x, h);
                h.iter_mut().for_each(|v| *v /= factor * factor);
            }
            Facet::Restricted { inner, kept, full_dim } => {
                let n = *full_dim;
                let mut full = vec![0.0; n * n];
                inner.hessian(&embed(c, kept, n), &mut full);
                let m = kept.len();
                for (a, &ka) in kept.iter().enumerate() {
                    for (b, &kb) in kept.iter().enumerate() {
                        h[a * m + b] = full[ka * n + kb];
                    }
                }
            }
            Facet::Custom(f) => f.hessian(c, h),
        }
    }

    /// The facet restricted to the coordinates in `kept` (others pinned to 0).
    /// Returns `None` when the restriction is a constant, i.e. places no
    /// constraint on the kept users.
    pub fn restrict(&self, kept: &[usize], full_dim: usize) -> Option<Facet> {
        if kept.len() == full_dim {
            return Some(self.clone());
        }
        match self {
            Facet::Linear { coef, bound } => {
                let sub: Vec<f64> = kept.iter().map(|&k| coef[k]).collect();
                if sub.iter().all(|&v| v == 0.0) {
                    None
                } else {
                    Some(Facet::Linear { coef: sub, bound: *bound })
                }
            }
            _ => Some(Facet::Restricted { inner: Box::new(self.clone()), kept: kept.to_vec(), full_dim }),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn embed(c: &[f64], kept: &[usize], full_dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; full_dim];
    for (&k, &v) in kept.iter().zip(c) {
        x[k] = v;
    }
    x
}

/// The facets of one environment state.
#[derive(Debug, Clone)]
pub struct StateRegion {
    pub dim: usize,
    pub facets: Vec<Facet>,
    /// Index of the `Σc − C_U` facet, when the region has one.
    pub sum_facet: Option<usize>,
}

impl StateRegion {
    pub fn new(dim: usize, facets: Vec<Facet>, sum_facet: Option<usize>) -> Self {
        Self { dim, facets, sum_facet }
    }

    pub fn max_violation(&self, c: &[f64]) -> f64 {
        self.facets.iter().map(|f| f.value(c)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Constant of the sum-capacity facet.
    pub fn sum_facet_constant(&self) -> Option<f64> {
        self.sum_facet.and_then(|k| match &self.facets[k] {
            Facet::Linear { bound, .. } => Some(*bound),
            _ => None,
        })
    }

    /// `sup{s ≥ 0 : s·e_j ∈ R}` along one coordinate axis.
    pub fn axis_extent(&self, j: usize) -> f64 {
        let feasible = |s: f64| {
            let mut c = vec![0.0; self.dim];
            c[j] = s;
            self.max_violation(&c) <= 0.0
        };
        if !feasible(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while feasible(hi) {
            hi *= 2.0;
            if hi > 1e15 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        lo
    }
}

/// Built-in curved test family: the disk `‖c‖ ≤ radius` cut by `Σc ≤ sum_capacity`.
pub fn disk_simplex(users: usize, radius: f64, sum_capacity: f64) -> StateRegion {
    let mut m = vec![0.0; users * users];
    for a in 0..users {
        m[a * users + a] = 1.0;
    }
    StateRegion::new(
        users,
        vec![
            Facet::sum(users, sum_capacity),
            Facet::Quadratic { matrix: m, linear: vec![0.0; users], offset: 0.5 * radius * radius },
        ],
        Some(0),
    )
}

/// Built-in curved test family: the ellipse `Σ_j (c_j / axes_j)² ≤ 1`.
pub fn ellipse(axes: &[f64]) -> StateRegion {
    let n = axes.len();
    let mut m = vec![0.0; n * n];
    for a in 0..n {
        m[a * n + a] = 2.0 / (axes[a] * axes[a]);
    }
    StateRegion::new(n, vec![Facet::Quadratic { matrix: m, linear: vec![0.0; n], offset: 1.0 }], None)
}

/// A convex rate region for `J` users, one [`StateRegion`] per environment state.
#[derive(Debug, Clone)]
pub struct CapacityRegion {
    users: usize,
    states: Vec<StateRegion>,
}

impl CapacityRegion {
    pub fn new(users: usize, states: Vec<StateRegion>) -> Result<Self, CapacityError> {
        if users == 0 {
            return Err(CapacityError::NoUsers);
        }
        if states.is_empty() {
            return Err(CapacityError::Invalid("no states".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if s.dim != users {
                return Err(CapacityError::Invalid(format!("state {i} has dimension {}", s.dim)));
            }
            for (k, f) in s.facets.iter().enumerate() {
                if f.dim() != users {
                    return Err(CapacityError::Invalid(format!("state {i} facet {k} has dimension {}", f.dim())));
                }
                if f.value(&vec![0.0; users]) > BOUNDARY_TOL {
                    return Err(CapacityError::Invalid(format!("state {i} facet {k} excludes the origin")));
                }
            }
            if let Some(k) = s.sum_facet {
                if k >= s.facets.len() {
                    return Err(CapacityError::Invalid(format!("state {i} sum facet index {k} out of range")));
                }
            }
        }
        Ok(Self { users, states })
    }

    /// The same facets in every one of `k` states.
    pub fn uniform(users: usize, state: StateRegion, k: usize) -> Result<Self, CapacityError> {
        Self::new(users, vec![state; k])
    }

    /// A simplex `Σc ≤ C_U(i)` per state.
    pub fn simplex(users: usize, sum_capacities: &[f64]) -> Result<Self, CapacityError> {
        let states = sum_capacities
            .iter()
            .map(|&cu| StateRegion::new(users, vec![Facet::sum(users, cu)], Some(0)))
            .collect();
        Self::new(users, states)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> Result<&StateRegion, CapacityError> {
        self.states.get(i).ok_or(CapacityError::BadState { state: i, count: self.states.len() })
    }

    pub fn states(&self) -> &[StateRegion] {
        &self.states
    }

    /// Every facet replaced by `h(c / factor)`.
    pub fn scaled(&self, factor: f64) -> CapacityRegion {
        let states = self
            .states
            .iter()
            .map(|s| {
                let facets = s
                    .facets
                    .iter()
                    .map(|f| match f {
                        Facet::Linear { coef, bound } => Facet::Linear { coef: coef.clone(), bound: bound * factor },
                        other => Facet::Scaled { inner: Box::new(other.clone()), factor },
                    })
                    .collect();
                StateRegion::new(s.dim, facets, s.sum_facet)
            })
            .collect();
        CapacityRegion { users: self.users, states }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Interior,
    Boundary,
    Outside,
}

pub fn membership(region: &CapacityRegion, i: usize, c: &[f64]) -> Result<Membership, CapacityError> {
    let state = region.state(i)?;
    if c.len() != region.users {
        return Err(CapacityError::Dimension { expected: region.users, got: c.len() });
    }
    Ok(classify(state, c))
}

pub(crate) fn classify(state: &StateRegion, c: &[f64]) -> Membership {
    if c.iter().any(|&v| v < -BOUNDARY_TOL) {
        return Membership::Outside;
    }
    let worst = state.max_violation(c);
    if worst < -BOUNDARY_TOL {
        Membership::Interior
    } else if worst <= BOUNDARY_TOL {
        Membership::Boundary
    } else {
        Membership::Outside
    }
}

/// Users whose axis extent is zero: no positive rate is ever feasible for them.
pub fn pinned_users(state: &StateRegion) -> Vec<usize> {
    (0..state.dim).filter(|&j| state.axis_extent(j) < 1e-12).collect()
}

/// `max_{c ∈ R(i)} Σ_j c_j`, computed with the barrier solver.
pub fn sum_capacity(region: &CapacityRegion, i: usize) -> Result<f64, CapacityError> {
    let state = region.state(i)?;
    let pinned = pinned_users(state);
    if pinned.len() == state.dim {
        return Ok(0.0);
    }
    let zero: Vec<usize> = pinned;
    let reduced = reduce_state(state, &zero)?;
    let obj = LinearObjective(vec![1.0; reduced.region.dim]);
    let sol = solver::maximize(&reduced.region.facets, reduced.region.dim, &obj, &SolverOptions::default())?;
    let total: f64 = sol.c.iter().sum();
    // a declared sum facet that the maximizer reaches gives the value exactly
    match state.sum_facet_constant() {
        Some(b) if (total - b).abs() <= 1e-6 * b.max(1.0) => Ok(b),
        _ => Ok(total),
    }
}

/// Equal-component point on the sum-capacity facet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedPoint {
    pub state: usize,
    pub rates: Vec<f64>,
    pub sum_capacity: f64,
}

pub fn balanced_point(region: &CapacityRegion, i: usize) -> Result<BalancedPoint, CapacityError> {
    let cu = sum_capacity(region, i)?;
    let state = region.state(i)?;
    let j = region.users as f64;
    let rates = vec![cu / j; region.users];
    for (k, f) in state.facets.iter().enumerate() {
        let v = f.value(&rates);
        if v > BOUNDARY_TOL {
            return Err(CapacityError::BalancedPointInfeasible { state: i, share: cu / j, facet: k, violation: v });
        }
    }
    Ok(BalancedPoint { state: i, rates, sum_capacity: cu })
}

/// Balanced points for all states.
pub fn balanced_points(region: &CapacityRegion) -> Result<Vec<Vec<f64>>, CapacityError> {
    (0..region.state_count()).map(|i| balanced_point(region, i).map(|b| b.rates)).collect()
}

/// Facet count `L` of a `J`-user region and the number `B = L − J` of
/// facets on the capacity surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FacetCount {
    pub total: u64,
    pub surface: u64,
}

/// `L = J! + Σ_{j=2}^{J} C(J, j)·(J − j + 1)! + J`.
pub fn facet_count(users: usize) -> Result<FacetCount, CapacityError> {
    if users == 0 {
        return Err(CapacityError::NoUsers);
    }
    let overflow = || CapacityError::Overflow(users);
    let jj = users as u64;
    let fact = |n: u64| -> Option<u64> { (1..=n).try_fold(1u64, |acc, v| acc.checked_mul(v)) };
    let binom = |n: u64, k: u64| -> Option<u64> {
        let k = k.min(n - k);
        let mut acc: u128 = 1;
        for v in 0..k {
            acc = acc * (n - v) as u128 / (v + 1) as u128;
        }
        u64::try_from(acc).ok()
    };
    let mut total = fact(jj).ok_or_else(overflow)?;
    for j in 2..=jj {
        let term = binom(jj, j).and_then(|b| fact(jj - j + 1).and_then(|f| b.checked_mul(f))).ok_or_else(overflow)?;
        total = total.checked_add(term).ok_or_else(overflow)?;
    }
    total = total.checked_add(jj).ok_or_else(overflow)?;
    Ok(FacetCount { total, surface: total - jj })
}

/// A state region with some users removed (their rates pinned to zero).
#[derive(Debug, Clone)]
pub struct ReducedRegion {
    /// Original indices of the users that remain, ascending.
    pub kept: Vec<usize>,
    /// Facets over the kept coordinates.
    pub region: StateRegion,
    /// Original facet index of each reduced facet.
    pub facet_map: Vec<usize>,
    pub full_dim: usize,
}

impl ReducedRegion {
    /// Expands a reduced rate vector to the full user set.
    pub fn embed(&self, c: &[f64]) -> Vec<f64> {
        embed(c, &self.kept, self.full_dim)
    }
}

pub fn reduce(region: &CapacityRegion, i: usize, zero_set: &[usize]) -> Result<ReducedRegion, CapacityError> {
    reduce_state(region.state(i)?, zero_set)
}

pub fn reduce_state(state: &StateRegion, zero_set: &[usize]) -> Result<ReducedRegion, CapacityError> {
    let n = state.dim;
    if let Some(&bad) = zero_set.iter().find(|&&j| j >= n) {
        return Err(CapacityError::BadUser(bad));
    }
    let kept: Vec<usize> = (0..n).filter(|j| !zero_set.contains(j)).collect();
    if kept.is_empty() {
        return Err(CapacityError::EmptyReduction);
    }
    let mut facets = Vec::new();
    let mut facet_map = Vec::new();
    let mut sum_facet = None;
    for (k, f) in state.facets.iter().enumerate() {
        if let Some(r) = f.restrict(&kept, n) {
            if state.sum_facet == Some(k) {
                sum_facet = Some(facets.len());
            }
            facets.push(r);
            facet_map.push(k);
        }
    }
    Ok(ReducedRegion { region: StateRegion::new(kept.len(), facets, sum_facet), kept, facet_map, full_dim: n })
}
