//! Log-barrier interior-point solver with active-set polishing for
//!
//! ```text
//! maximize f(c)  subject to  h_k(c) ≤ 0,  c ≥ 0
//! ```
//!
//! where `f` is concave with a diagonal Hessian and every `h_k` is a smooth
//! convex [`Facet`]. Dimensions are small (one coordinate per user), so every
//! Newton system is solved densely.
//!
//! After the barrier path reaches `t_final`, the constraints that are active
//! at the barrier point are fixed and the KKT equalities are solved by Newton's
//! method. The polished point is accepted only if its multipliers have the
//! right signs; otherwise the barrier point (with multipliers `1 / (t·(−h_k))`)
//! is returned.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::capacity::Facet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("feasible region has no strictly interior point")]
    NoInterior,
    #[error("feasible region is unbounded along the diagonal")]
    Unbounded,
    #[error("solver did not converge after {iterations} Newton steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("objective has dimension {objective}, facets have {facets}")]
    Dimension { objective: usize, facets: usize },
}

/// Concave objective with a diagonal Hessian.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, c: &[f64]) -> f64;
    fn gradient(&self, c: &[f64], g: &mut [f64]);
    fn hessian_diag(&self, c: &[f64], d: &mut [f64]);
}

/// `w·c`.
#[derive(Debug, Clone)]
pub struct LinearObjective(pub Vec<f64>);

impl Objective for LinearObjective {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn value(&self, c: &[f64]) -> f64 {
        self.0.iter().zip(c).map(|(w, x)| w * x).sum()
    }
    fn gradient(&self, _c: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&self.0);
    }
    fn hessian_diag(&self, _c: &[f64], d: &mut [f64]) {
        d.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Final barrier parameter; the duality gap is `(m + n) / t_final`.
    pub t_final: f64,
    /// Barrier parameter growth per outer iteration.
    pub growth: f64,
    pub max_newton: usize,
    /// Constraints with `−h_k` below this at the barrier point seed the active set.
    pub active_tol: f64,
    pub polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { t_final: 1e11, growth: 12.0, max_newton: 4000, active_tol: 1e-6, polish: true }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub c: Vec<f64>,
    /// Multiplier of each facet.
    pub eta: Vec<f64>,
    /// Multiplier of each bound `c_j ≥ 0`.
    pub bound_dual: Vec<f64>,
    pub polished: bool,
    pub newton_steps: usize,
}

/// `max_j |c_j (∂f/∂c_j − Σ_k η_k ∂h_k/∂c_j)| + max_k |η_k h_k(c)|`.
pub fn kkt_residual(facets: &[Facet], obj: &dyn Objective, c: &[f64], eta: &[f64]) -> f64 {
    let n = c.len();
    let mut grad = vec![0.0; n];
    obj.gradient(c, &mut grad);
    let mut hg = vec![0.0; n];
    let mut comp: f64 = 0.0;
    for (f, &e) in facets.iter().zip(eta) {
        if e == 0.0 {
            continue;
        }
        f.gradient(c, &mut hg);
        for j in 0..n {
            grad[j] -= e * hg[j];
        }
        comp = comp.max((e * f.value(c)).abs());
    }
    let stat = (0..n).map(|j| (c[j] * grad[j]).abs()).fold(0.0, f64::max);
    stat + comp
}

struct Barrier<'a> {
    facets: &'a [Facet],
    obj: &'a dyn Objective,
    n: usize,
    hval: Vec<f64>,
    hgrad: Vec<f64>,
    hhess: Vec<f64>,
}

impl<'a> Barrier<'a> {
    fn new(facets: &'a [Facet], obj: &'a dyn Objective, n: usize) -> Self {
        Self { facets, obj, n, hval: vec![0.0; facets.len()], hgrad: vec![0.0; n], hhess: vec![0.0; n * n] }
    }

    fn feasible(&self, c: &[f64]) -> bool {
        c.iter().all(|&v| v > 0.0) && self.facets.iter().all(|f| f.value(c) < 0.0)
    }

    fn value(&self, c: &[f64], t: f64) -> f64 {
        let mut v = -t * self.obj.value(c);
        for f in self.facets {
            v -= (-f.value(c)).ln();
        }
        for &x in c {
            v -= x.ln();
        }
        v
    }

    /// Fills gradient and Hessian of `−t f − Σ log(−h) − Σ log c`.
    fn derivatives(&mut self, c: &[f64], t: f64, g: &mut [f64], h: &mut [f64]) {
        let n = self.n;
        self.obj.gradient(c, g);
        let mut d = vec![0.0; n];
        self.obj.hessian_diag(c, &mut d);
        h.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            g[j] = -t * g[j] - 1.0 / c[j];
            h[j * n + j] = -t * d[j] + 1.0 / (c[j] * c[j]);
        }
        for (k, f) in self.facets.iter().enumerate() {
            let hv = f.value(c);
            self.hval[k] = hv;
            let s = -hv;
            f.gradient(c, &mut self.hgrad);
            for a in 0..n {
                g[a] += self.hgrad[a] / s;
                for b in 0..n {
                    h[a * n + b] += self.hgrad[a] * self.hgrad[b] / (s * s);
                }
            }
            if !f.is_linear() {
                f.hessian(c, &mut self.hhess);
                for a in 0..n * n {
                    h[a] += self.hhess[a] / s;
                }
            }
        }
    }
}

fn solve_spd(h: &[f64], g: &[f64], n: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, h);
    let rhs = DVector::from_iterator(n, g.iter().map(|v| -v));
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(&rhs).iter().copied().collect());
    }
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Strictly interior starting point `s·1` with `s` half the diagonal extent.
fn interior_start(facets: &[Facet], n: usize) -> Result<Vec<f64>, SolveError> {
    let feasible = |s: f64| facets.iter().all(|f| f.value(&vec![s; n]) <= 0.0);
    if !feasible(0.0) {
        return Err(SolveError::NoInterior);
    }
    let mut hi = 1.0;
    while feasible(hi) {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(SolveError::Unbounded);
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = vec![0.5 * lo; n];
    if lo <= 1e-14 || facets.iter().any(|f| f.value(&c) >= 0.0) {
        return Err(SolveError::NoInterior);
    }
    Ok(c)
}

pub fn maximize(facets: &[Facet], n: usize, obj: &dyn Objective, opts: &SolverOptions) -> Result<Solution, SolveError> {
    if obj.dim() != n {
        return Err(SolveError::Dimension { objective: obj.dim(), facets: n });
    }
    if let Some(f) = facets.iter().find(|f| f.dim() != n) {
        return Err(SolveError::Dimension { objective: n, facets: f.dim() });
    }
    let m = facets.len();
    if n == 0 {
        return Ok(Solution { c: vec![], eta: vec![0.0; m], bound_dual: vec![], polished: true, newton_steps: 0 });
    }
    let mut c = interior_start(facets, n)?;
    let mut bar = Barrier::new(facets, obj, n);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    let mut steps = 0usize;
    let scale = {
        let mut gr = vec![0.0; n];
        obj.gradient(&c, &mut gr);
        gr.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12)
    };
    // Start with t chosen so the objective and barrier gradients are comparable.
    let mut t = (1.0 / scale).max(1e-6);
    let t_final = opts.t_final;
    loop {
        // Newton centering.
        let mut inner = 0;
        loop {
            bar.derivatives(&c, t, &mut g, &mut h);
            let d = match solve_spd(&h, &g, n) {
                Some(d) => d,
                None => break,
            };
            let lambda2: f64 = -g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            steps += 1;
            inner += 1;
            if !(lambda2 > 1e-20) || steps > opts.max_newton {
                break;
            }
            let mut s = 1.0;
            let trial = |s: f64| -> Vec<f64> { c.iter().zip(&d).map(|(x, y)| x + s * y).collect() };
            while !bar.feasible(&trial(s)) {
                s *= 0.5;
                if s < 1e-20 {
                    break;
                }
            }
            if lambda2 > 1e-6 {
                let f0 = bar.value(&c, t);
                while bar.value(&trial(s), t) > f0 - 0.25 * s * lambda2 {
                    s *= 0.5;
                    if s < 1e-20 {
                        break;
                    }
                }
            }
            if s < 1e-20 {
                break;
            }
            c = trial(s);
            if lambda2 < 1e-18 || inner > 200 {
                break;
            }
        }
        if steps > opts.max_newton {
            let eta: Vec<f64> = facets.iter().map(|f| 1.0 / (t * -f.value(&c))).collect();
            return Err(SolveError::NonConvergence { iterations: steps, residual: kkt_residual(facets, obj, &c, &eta) });
        }
        if t >= t_final {
            break;
        }
        t = (t * opts.growth).min(t_final);
    }
    let eta: Vec<f64> = facets.iter().map(|f| 1.0 / (t * -f.value(&c))).collect();
    let bound_dual: Vec<f64> = c.iter().map(|x| 1.0 / (t * x)).collect();
    let barrier = Solution { c, eta, bound_dual, polished: false, newton_steps: steps };
    if opts.polish {
        if let Some(p) = polish(facets, obj, &barrier, opts.active_tol) {
            let r0 = kkt_residual(facets, obj, &barrier.c, &barrier.eta);
            let r1 = kkt_residual(facets, obj, &p.c, &p.eta);
            if r1 <= r0.max(1e-12) {
                return Ok(Solution { newton_steps: barrier.newton_steps + p.newton_steps, ..p });
            }
        }
    }
    Ok(barrier)
}

/// Newton's method on the KKT equalities of the barrier point's active set.
fn polish(facets: &[Facet], obj: &dyn Objective, start: &Solution, tol: f64) -> Option<Solution> {
    let n = start.c.len();
    let active: Vec<usize> = (0..facets.len()).filter(|&k| -facets[k].value(&start.c) < tol).collect();
    let free: Vec<usize> = (0..n).filter(|&j| start.c[j] >= tol).collect();
    let bound: Vec<usize> = (0..n).filter(|&j| start.c[j] < tol).collect();
    let (nf, na) = (free.len(), active.len());
    if na > nf {
        return None;
    }
    let mut c = start.c.clone();
    for &j in &bound {
        c[j] = 0.0;
    }
    let mut eta: Vec<f64> = active.iter().map(|&k| start.eta[k]).collect();
    let size = nf + na;
    let mut grad = vec![0.0; n];
    let mut hd = vec![0.0; n];
    let mut fg = vec![0.0; n];
    let mut fh = vec![0.0; n * n];
    let mut steps = 0;
    let mut converged = size == 0;
    for _ in 0..60 {
        if size == 0 {
            break;
        }
        steps += 1;
        obj.gradient(&c, &mut grad);
        obj.hessian_diag(&c, &mut hd);
        let mut jac = DMatrix::<f64>::zeros(size, size);
        let mut res = DVector::<f64>::zeros(size);
        for (a, &j) in free.iter().enumerate() {
            res[a] = grad[j];
            jac[(a, a)] = hd[j];
        }
        for (b, &k) in active.iter().enumerate() {
            let f = &facets[k];
            f.gradient(&c, &mut fg);
            res[nf + b] = f.value(&c);
            for (a, &j) in free.iter().enumerate() {
                res[a] -= eta[b] * fg[j];
                jac[(a, nf + b)] = -fg[j];
                jac[(nf + b, a)] = fg[j];
            }
            if !f.is_linear() {
                f.hessian(&c, &mut fh);
                for (a, &ja) in free.iter().enumerate() {
                    for (a2, &jb) in free.iter().enumerate() {
                        jac[(a, a2)] -= eta[b] * fh[ja * n + jb];
                    }
                }
            }
        }
        let rnorm = res.amax();
        if rnorm < 1e-15 * (1.0 + grad.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            converged = true;
            break;
        }
        let delta = jac.lu().solve(&(-&res))?;
        for (a, &j) in free.iter().enumerate() {
            c[j] += delta[a];
        }
        for b in 0..na {
            eta[b] += delta[nf + b];
        }
        if delta.amax() < 1e-16 {
            converged = true;
            break;
        }
    }
    if !converged {
        // Accept if the last residual is already tiny.
        obj.gradient(&c, &mut grad);
    }
    // Sign and feasibility checks.
    if free.iter().any(|&j| c[j] < 0.0) || eta.iter().any(|&e| e < -1e-12) {
        return None;
    }
    let mut full_eta = vec![0.0; facets.len()];
    for (b, &k) in active.iter().enumerate() {
        full_eta[k] = eta[b].max(0.0);
    }
    for (k, f) in facets.iter().enumerate() {
        if f.value(&c) > 1e-12 {
            return None;
        }
        if !active.contains(&k) && f.value(&c) > -1e-14 {
            // touching but not in the active set
            full_eta[k] = 0.0;
        }
    }
    obj.gradient(&c, &mut grad);
    let mut stat = grad.clone();
    for (k, f) in facets.iter().enumerate() {
        if full_eta[k] != 0.0 {
            f.gradient(&c, &mut fg);
            for j in 0..n {
                stat[j] -= full_eta[k] * fg[j];
            }
        }
    }
    let scale = 1.0 + grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut bound_dual = vec![0.0; n];
    for &j in &bound {
        if stat[j] > 1e-9 * scale {
            return None;
        }
        bound_dual[j] = -stat[j];
    }
    if free.iter().any(|&j| stat[j].abs() > 1e-9 * scale) {
        return None;
    }
    Some(Solution { c, eta: full_eta, bound_dual, polished: true, newton_steps: steps })
}
