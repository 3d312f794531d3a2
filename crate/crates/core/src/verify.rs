//! Property suites for the allocator, the dual cost and the capacity
//! regions, reported as a pass/fail table.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::allocator::{self, KKT_TOL};
use crate::capacity::{self, CapacityRegion, StateRegion};
use crate::dual_cost;
use crate::mimo::{self, ChannelSet, CMatrix, CovarianceProfile, PriorityVector};
use crate::rng::{Purpose, SeedStreams};
use crate::utility::UtilityFamily;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, metric: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed: metric.is_finite() && metric <= threshold, metric, threshold, detail }
    }

    fn failed(name: &str, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed: false, metric: f64::NAN, threshold, detail }
    }
}

/// Sample sizes of the suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VerifyOptions {
    pub kkt_instances: usize,
    pub rivals: usize,
    pub homogeneity_samples: usize,
    pub probe_samples: usize,
    pub boundary_points: usize,
    pub chord_trials: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { kkt_instances: 1000, rivals: 1000, homogeneity_samples: 100, probe_samples: 100, boundary_points: 21, chord_trials: 1000 }
    }
}

fn rng(seed: u64, index: u64) -> ChaCha8Rng {
    SeedStreams::new(seed).rng(Purpose::Probe, index)
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
}

/// `L(2) = 5` with `B = 3`, `L(3) = 16`.
pub fn check_facet_count() -> CheckResult {
    let got: Vec<(u64, u64)> = [2, 3].iter().map(|&j| capacity::facet_count(j).map(|f| (f.total, f.surface)).unwrap_or((0, 0))).collect();
    let ok = got[0] == (5, 3) && got[1].0 == 16;
    CheckResult { name: "facet-count".into(), passed: ok, metric: if ok { 0.0 } else { 1.0 }, threshold: 0.0, detail: format!("L(2), B(2) = {:?}; L(3) = {}", got[0], got[1].0) }
}

/// A random region of one of three families: simplex, quadratic, 2-user MAC.
pub fn random_region(rng: &mut ChaCha8Rng, family: usize) -> CapacityRegion {
    match family % 3 {
        0 => {
            let users = rng.random_range(2..=3);
            CapacityRegion::simplex(users, &[rng.random_range(0.5..3.0)]).expect("valid simplex")
        }
        1 => {
            let users = rng.random_range(2..=3);
            let axes: Vec<f64> = (0..users).map(|_| rng.random_range(0.5..3.0)).collect();
            CapacityRegion::new(users, vec![capacity::ellipse(&axes)]).expect("valid ellipse")
        }
        _ => {
            let gains = vec![vec![gaussian(rng), gaussian(rng)]];
            let powers = [rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)];
            let ch = ChannelSet::scalar(&gains).expect("scalar channel");
            mimo::mac_region_scalar(&ch, &powers, 0).expect("valid MAC")
        }
    }
}

/// Uniform draws from the bounding box of `state`, kept when feasible.
pub fn feasible_points(state: &StateRegion, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let ext: Vec<f64> = (0..state.dim).map(|j| state.axis_extent(j)).collect();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n && tries < 1000 * n {
        tries += 1;
        let c: Vec<f64> = ext.iter().map(|&e| rng.random::<f64>() * e).collect();
        if state.max_violation(&c) <= 0.0 {
            out.push(c);
        }
    }
    out
}

/// Every allocation on random instances is certified by an independently
/// recomputed KKT residual and beats random feasible rivals.
pub fn check_kkt(instances: usize, rivals: usize, seed: u64) -> CheckResult {
    let name = "kkt-certification";
    let mut r = rng(seed, 1);
    let mut worst: f64 = 0.0;
    let mut beaten = 0usize;
    for n in 0..instances {
        let region = random_region(&mut r, n);
        let users = region.users();
        let utility = if n % 2 == 0 { UtilityFamily::linear_log(&vec![1.0; users]) } else { UtilityFamily::power(users, 1.0, 0.5) };
        let q: Vec<f64> = (0..users).map(|_| r.random_range(0.05..5.0)).collect();
        let a = match allocator::allocate(&region, 0, &q, &utility) {
            Ok(a) => a,
            Err(e) => return CheckResult::failed(name, KKT_TOL, format!("instance {n}: {e}")),
        };
        let residual = allocator::kkt_residual(&region, 0, &q, &a.c, &a.eta, &utility).unwrap_or(f64::INFINITY);
        worst = worst.max(residual);
        let best = utility.total(&q, &a.c);
        let state = region.state(0).expect("one state");
        beaten += feasible_points(state, rivals, &mut r).iter().filter(|x| utility.total(&q, x) > best + 1e-9).count();
    }
    let mut res = CheckResult::new(name, worst, KKT_TOL, format!("{instances} instances, {rivals} rivals each, {beaten} rivals better"));
    res.passed &= beaten == 0;
    res
}

/// `Λ(a q) = Λ(q)` for the built-in families on random regions.
pub fn check_homogeneity(samples: usize, seed: u64) -> CheckResult {
    let name = "radial-homogeneity";
    let mut r = rng(seed, 2);
    let mut worst: f64 = 0.0;
    for n in 0..samples {
        let region = random_region(&mut r, n);
        let users = region.users();
        let families = [UtilityFamily::linear_log(&vec![1.0; users]), UtilityFamily::power(users, 1.5, 0.5)];
        let q: Vec<f64> = (0..users).map(|_| r.random_range(0.05..5.0)).collect();
        let a = r.random_range(0.1..10.0);
        for u in &families {
            match allocator::is_radially_homogeneous(&region, 0, u, &q, a) {
                Ok(h) => worst = worst.max(h.discrepancy),
                Err(e) => return CheckResult::failed(name, 1e-6, format!("sample {n}: {e}")),
            }
        }
    }
    CheckResult::new(name, worst, 1e-6, format!("{samples} (q, a) pairs, 2 families"))
}

/// `Λ(q*(w, ρ)) = ρ` in every state for `w ∈ {0.5, 1, 4, 10}`.
pub fn check_duality_roundtrip(region: &CapacityRegion, utility: &UtilityFamily, mu: &[f64]) -> CheckResult {
    let name = "duality-roundtrip";
    let mut worst: f64 = 0.0;
    for i in 0..region.state_count() {
        for w in [0.5, 1.0, 4.0, 10.0] {
            match dual_cost::duality_roundtrip(region, i, utility, mu, w) {
                Ok(d) => worst = worst.max(d),
                Err(e) => return CheckResult::failed(name, 1e-6, format!("state {i}, w = {w}: {e}")),
            }
        }
    }
    CheckResult::new(name, worst, 1e-6, format!("{} states × 4 workloads", region.state_count()))
}

/// Sum-rate gap for perturbations of radius `0.01 w` around `q*`.
pub fn check_full_utilization(region: &CapacityRegion, utility: &UtilityFamily, mu: &[f64], samples: usize, seed: u64) -> CheckResult {
    let name = "full-utilization";
    let mut worst: f64 = 0.0;
    for i in 0..region.state_count() {
        for (k, w) in [1.0, 4.0].into_iter().enumerate() {
            let s = SeedStreams::new(seed).replica((i * 2 + k) as u64);
            match dual_cost::full_utilization_check(region, i, utility, mu, w, 0.01 * w, samples, dual_cost::WORKLOAD_FLOOR, s) {
                Ok(p) => worst = worst.max(p.gap),
                Err(e) => return CheckResult::failed(name, 1e-4, format!("state {i}, w = {w}: {e}")),
            }
        }
    }
    CheckResult::new(name, worst, 1e-4, format!("{samples} probes per (state, w)"))
}

/// `∂C_j/∂q_j` against `(1/μ_j) ∂U_j/∂c_j` and against centred differences of `C_j`.
pub fn check_dual_cost_gradient(utility: &UtilityFamily, mu: &[f64], samples: usize, seed: u64) -> CheckResult {
    let mut r = rng(seed, 3);
    let mut worst_identity: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..samples {
        let j = r.random_range(0..mu.len());
        let q = r.random_range(0.1..5.0);
        let c = r.random_range(0.1..3.0);
        let d = dual_cost::cost_derivative(utility, mu, j, q, c);
        worst_identity = worst_identity.max((d - utility.marginal(j, q, c) / mu[j]).abs());
        let h = 1e-5 * q.max(1.0);
        let fd = (dual_cost::cost(utility, mu, j, q + h, c) - dual_cost::cost(utility, mu, j, q - h, c)) / (2.0 * h);
        worst_fd = worst_fd.max((fd - d).abs() / d.abs().max(1e-12));
    }
    let mut res = CheckResult::new("dual-cost-gradient", worst_fd, 1e-6, format!("marginal identity error {worst_identity:e}"));
    res.passed &= worst_identity < 1e-10;
    res
}

/// `Σ q*_j / μ_j = w` and `q* > 0` for `w > 0`.
pub fn check_fixed_point(region: &CapacityRegion, utility: &UtilityFamily, mu: &[f64]) -> CheckResult {
    let name = "fixed-point-tightness";
    let rho = match capacity::balanced_points(region) {
        Ok(r) => r,
        Err(e) => return CheckResult::failed(name, 1e-9, e.to_string()),
    };
    let mut worst: f64 = 0.0;
    let mut positive = true;
    for rho_i in &rho {
        for w in [0.01, 0.5, 1.0, 4.0, 10.0, 100.0] {
            match dual_cost::fixed_point(utility, mu, w, rho_i) {
                Ok(fp) => {
                    let load: f64 = fp.q.iter().zip(mu).map(|(q, m)| q / m).sum();
                    worst = worst.max((load - w).abs() / w);
                    positive &= fp.q.iter().all(|&q| q > 0.0);
                }
                Err(e) => return CheckResult::failed(name, 1e-9, format!("w = {w}: {e}")),
            }
        }
    }
    let mut res = CheckResult::new(name, worst, 1e-9, format!("positive: {positive}"));
    res.passed &= positive;
    res
}

/// Balanced points sit on the sum facet and inside the region.
pub fn check_balanced_points(region: &CapacityRegion) -> CheckResult {
    let name = "balanced-points";
    let mut worst: f64 = 0.0;
    for i in 0..region.state_count() {
        let b = match capacity::balanced_point(region, i) {
            Ok(b) => b,
            Err(e) => return CheckResult::failed(name, capacity::BOUNDARY_TOL, format!("state {i}: {e}")),
        };
        let state = region.state(i).expect("state exists");
        worst = worst.max(state.max_violation(&b.rates).max(0.0));
        worst = worst.max((b.rates.iter().sum::<f64>() - b.sum_capacity).abs());
    }
    CheckResult::new(name, worst, capacity::BOUNDARY_TOL, format!("{} states", region.state_count()))
}

/// Single-antenna 2-user uplink: boundary points lie on the sum facet, and
/// off the tie on the single-user facet of the user with the larger weight.
pub fn check_mac_boundary(points: usize) -> CheckResult {
    let name = "mac-boundary";
    let h = [Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.6)];
    let p = [1.5, 2.0];
    let snr = [h[0].norm_sqr() * p[0], h[1].norm_sqr() * p[1]];
    let g = [(1.0 + snr[0]).ln(), (1.0 + snr[1]).ln(), (1.0 + snr[0] + snr[1]).ln()];
    let ch = ChannelSet::scalar(&[h.to_vec()]).expect("scalar channel");
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let x = k as f64 / (points - 1).max(1) as f64;
        let nu = match PriorityVector::normalized(&[x.max(1e-9), (1.0 - x).max(1e-9)]) {
            Ok(nu) => nu,
            Err(e) => return CheckResult::failed(name, 1e-6, e.to_string()),
        };
        let c = match mimo::mac_boundary_point(&ch, &p, 0, &nu) {
            Ok(b) => b.rates,
            Err(e) => return CheckResult::failed(name, 1e-6, format!("ν = {:?}: {e}", nu.as_slice())),
        };
        let viol = (c[0] - g[0]).max(c[1] - g[1]).max(c[0] + c[1] - g[2]).max(0.0);
        worst = worst.max(viol).max((c[0] + c[1] - g[2]).abs());
        let (a, b) = (nu.as_slice()[0], nu.as_slice()[1]);
        if (a - b).abs() > 1e-9 {
            let last = if a > b { 0 } else { 1 };
            worst = worst.max((c[last] - g[last]).abs());
        }
    }
    CheckResult::new(name, worst, 1e-6, format!("{points} weight vectors"))
}

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| gaussian(rng));
    &a * a.adjoint()
}

/// Chord test of the weighted sum rate as a function of the covariances.
pub fn check_concavity(trials: usize, seed: u64) -> CheckResult {
    let mut r = rng(seed, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (users, n, m) = (2, 2, 2);
        let ch = ChannelSet::new(vec![(0..users).map(|_| CMatrix::from_fn(n, m, |_, _| gaussian(&mut r))).collect()]).expect("channels");
        let nu = PriorityVector::normalized(&[r.random_range(0.05..1.0), r.random_range(0.05..1.0)]).expect("weights");
        let a = CovarianceProfile { gammas: (0..users).map(|_| random_psd(n, &mut r)).collect() };
        let b = CovarianceProfile { gammas: (0..users).map(|_| random_psd(n, &mut r)).collect() };
        let t: f64 = r.random();
        let mix = CovarianceProfile { gammas: a.gammas.iter().zip(&b.gammas).map(|(x, y)| x * Complex64::from(t) + y * Complex64::from(1.0 - t)).collect() };
        let f = |p: &CovarianceProfile| mimo::weighted_sum_rate(&ch, 0, &nu, p).unwrap_or(f64::NAN);
        let gap = t * f(&a) + (1.0 - t) * f(&b) - f(&mix);
        worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
    }
    CheckResult::new("wsr-concavity", worst, 1e-10, format!("{trials} chords"))
}

/// Every suite, on the given model where a model is needed.
pub fn run_all(region: &CapacityRegion, utility: &UtilityFamily, mu: &[f64], opts: &VerifyOptions, seed: u64) -> Vec<CheckResult> {
    vec![
        check_facet_count(),
        check_kkt(opts.kkt_instances, opts.rivals, seed),
        check_homogeneity(opts.homogeneity_samples, seed),
        check_balanced_points(region),
        check_duality_roundtrip(region, utility, mu),
        check_full_utilization(region, utility, mu, opts.probe_samples, seed),
        check_dual_cost_gradient(utility, mu, 1000, seed),
        check_fixed_point(region, utility, mu),
        check_mac_boundary(opts.boundary_points),
        check_concavity(opts.chord_trials, seed),
    ]
}

/// Fixed-width table, one line per check.
pub fn table(results: &[CheckResult]) -> String {
    let mut out = format!("{:<24} {:<6} {:>12} {:>10}  detail\n", "check", "result", "metric", "threshold");
    for r in results {
        let _ = writeln!(out, "{:<24} {:<6} {:>12.3e} {:>10.1e}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.metric, r.threshold, r.detail);
    }
    out
}
