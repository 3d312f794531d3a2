//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//!
//! Oracles are computed here, independently of the library routines under
//! test, wherever a closed form exists.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rsq_core::allocator;
use rsq_core::capacity::{self, CapacityRegion, Facet, StateRegion};
use rsq_core::config::ExperimentConfig;
use rsq_core::dual_cost;
use rsq_core::experiment;
use rsq_core::heavy_traffic::{self, HeavyTrafficRun, HeavyTrafficSpec, SweepRow};
use rsq_core::markov_env::{self, EnvGenerator, EnvPath};
use rsq_core::mimo::{self, CMatrix, ChannelSet, CovarianceProfile, PriorityVector};
use rsq_core::queue_sim::{self, PolicyHandle, PolicyKind, SimSettings, TrafficSpec};
use rsq_core::rdrs::{self, RdrsSpec};
use rsq_core::rng::{Purpose, SeedStreams};
use rsq_core::stats::{self, Estimate};
use rsq_core::utility::UtilityFamily;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn rng(index: u64) -> ChaCha8Rng {
    SeedStreams::new(20_240_601).rng(Purpose::Probe, index)
}

fn bundled() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/symmetric2.json");
    ExperimentConfig::load(&path, &[]).expect("bundled config validates")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn ln_1p_snr(h: Complex64, p: f64) -> f64 {
    (1.0 + h.norm_sqr() * p).ln()
}

/// Scalar 2-user uplink facets `c₁ ≤ g₁`, `c₂ ≤ g₂`, `c₁ + c₂ ≤ g₁₂`.
fn scalar_mac_bounds(h: [Complex64; 2], p: [f64; 2]) -> [f64; 3] {
    [ln_1p_snr(h[0], p[0]), ln_1p_snr(h[1], p[1]), (1.0 + h[0].norm_sqr() * p[0] + h[1].norm_sqr() * p[1]).ln()]
}

fn gaussian(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
}

// 1 -------------------------------------------------------------------------

fn facet_count() -> Outcome {
    let t = Instant::now();
    let two = capacity::facet_count(2).unwrap();
    let three = capacity::facet_count(3).unwrap();
    let elapsed = t.elapsed();
    let ch = ChannelSet::scalar(&[vec![Complex64::new(1.0, 0.0), Complex64::new(0.7, 0.2)]]).unwrap();
    let explicit = mimo::mac_region(&ch, &[1.0, 2.0]).unwrap().state(0).unwrap().facets.len() as u64;
    let ok = two.total == 5 && two.surface == 3 && explicit == 3 && three.total == 16 && elapsed < Duration::from_millis(1);
    outcome(ok, format!("L(2) = {}, B(2) = {}, explicit MAC facets = {explicit}, L(3) = {}, {:?}", two.total, two.surface, three.total, elapsed))
}

// 2 -------------------------------------------------------------------------

/// Random region: simplex, quadratic or scalar 2-user uplink.
fn random_state(r: &mut ChaCha8Rng, n: usize) -> StateRegion {
    let dim = r.random_range(2..=3);
    match n % 3 {
        0 => StateRegion::new(dim, vec![Facet::sum(dim, r.random_range(0.5..3.0))], Some(0)),
        1 => {
            // ½ cᵀAc ≤ d with A = BᵀB + εI
            let b: Vec<f64> = (0..dim * dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let mut a = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    a[i * dim + j] = (0..dim).map(|k| b[k * dim + i] * b[k * dim + j]).sum::<f64>() + if i == j { 0.2 } else { 0.0 };
                }
            }
            StateRegion::new(dim, vec![Facet::Quadratic { matrix: a, linear: vec![0.0; dim], offset: r.random_range(0.5..3.0) }], None)
        }
        _ => {
            let h = [gaussian(r), gaussian(r)];
            let p = [r.random_range(0.5..4.0), r.random_range(0.5..4.0)];
            let ch = ChannelSet::scalar(&[h.to_vec()]).unwrap();
            mimo::mac_state_region(&ch, &p, 0).unwrap()
        }
    }
}

/// `max_j |c_j (∂U_j/∂c_j − Σ_k η_k ∂h_k/∂c_j)| + max_k |η_k h_k|`, plus the
/// sign conditions at `c_j = 0`, `η ≥ 0` and feasibility.
fn independent_kkt(state: &StateRegion, u: &UtilityFamily, q: &[f64], c: &[f64], eta: &[f64]) -> f64 {
    let n = c.len();
    let mut grad = vec![0.0; n];
    let mut stationarity = (0..n).map(|j| u.marginal(j, q[j], c[j])).collect::<Vec<_>>();
    let mut comp: f64 = 0.0;
    let mut sign: f64 = 0.0;
    for (f, &e) in state.facets.iter().zip(eta) {
        f.gradient(c, &mut grad);
        for j in 0..n {
            stationarity[j] -= e * grad[j];
        }
        comp = comp.max((e * f.value(c)).abs());
        sign = sign.max(-e).max(f.value(c));
    }
    let mut worst: f64 = 0.0;
    for j in 0..n {
        worst = worst.max((c[j] * stationarity[j]).abs());
        if c[j] <= 1e-9 {
            sign = sign.max(stationarity[j]);
        }
    }
    worst + comp + sign.max(0.0)
}

fn kkt_certification() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    let mut beaten = 0;
    let mut rivals_total = 0;
    for n in 0..1000 {
        let state = random_state(&mut r, n);
        let dim = state.dim;
        let region = CapacityRegion::new(dim, vec![state.clone()]).unwrap();
        let u = if n % 2 == 0 { UtilityFamily::linear_log(&vec![1.0; dim]) } else { UtilityFamily::power(dim, 1.0, 0.5) };
        let q: Vec<f64> = (0..dim).map(|_| r.random_range(0.05..5.0)).collect();
        let a = match allocator::allocate(&region, 0, &q, &u) {
            Ok(a) => a,
            Err(e) => return outcome(false, format!("instance {n}: {e}")),
        };
        worst = worst.max(independent_kkt(&state, &u, &q, &a.c, &a.eta));
        let best = u.total(&q, &a.c);
        let ext: Vec<f64> = (0..dim).map(|j| state.axis_extent(j)).collect();
        let mut taken = 0;
        while taken < 1000 {
            let x: Vec<f64> = ext.iter().map(|&e| r.random::<f64>() * e).collect();
            if state.facets.iter().all(|f| f.value(&x) <= 0.0) {
                taken += 1;
                if u.total(&q, &x) > best + 1e-9 {
                    beaten += 1;
                }
            }
        }
        rivals_total += taken;
    }
    outcome(worst < 1e-7 && beaten == 0, format!("max residual {worst:.2e} (< 1e-7), {beaten} of {rivals_total} rivals better"))
}

// 3 -------------------------------------------------------------------------

fn radial_homogeneity() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for n in 0..100 {
        let state = random_state(&mut r, n);
        let dim = state.dim;
        let region = CapacityRegion::new(dim, vec![state]).unwrap();
        let q: Vec<f64> = (0..dim).map(|_| r.random_range(0.05..5.0)).collect();
        let a = r.random_range(0.05..20.0);
        let aq: Vec<f64> = q.iter().map(|x| a * x).collect();
        for u in [UtilityFamily::linear_log(&vec![1.0; dim]), UtilityFamily::power(dim, 1.5, 0.5)] {
            let c1 = allocator::allocate(&region, 0, &q, &u).unwrap().c;
            let c2 = allocator::allocate(&region, 0, &aq, &u).unwrap().c;
            worst = worst.max(dist(&c1, &c2));
        }
    }
    outcome(worst < 1e-6, format!("max ‖Λ(aq) − Λ(q)‖ = {worst:.2e} over 100 pairs × 2 families (< 1e-6)"))
}

// 4 -------------------------------------------------------------------------

fn duality_round_trip() -> Outcome {
    let cfg = bundled();
    let region = cfg.capacity_region().unwrap();
    let u = cfg.utility_family().unwrap();
    let mu = cfg.traffic.mu.clone();
    let mut worst: f64 = 0.0;
    for i in 0..region.state_count() {
        let rho = capacity::balanced_point(&region, i).unwrap().rates;
        for w in [0.5, 1.0, 4.0, 10.0] {
            let q = dual_cost::fixed_point(&u, &mu, w, &rho).unwrap().q;
            worst = worst.max(dist(&allocator::allocate(&region, i, &q, &u).unwrap().c, &rho));
        }
    }
    // simplex, linear-log, μ = (1, 1): ρ = (C/2, C/2), q* = (w/2, w/2), Λ(q*) = ρ
    let cu = 2.5;
    let simplex = CapacityRegion::simplex(2, &[cu]).unwrap();
    let lin = UtilityFamily::linear_log(&[1.0, 1.0]);
    let rho = [cu / 2.0, cu / 2.0];
    let mut simplex_worst: f64 = 0.0;
    for w in [0.5, 1.0, 4.0, 10.0] {
        let q = dual_cost::fixed_point(&lin, &[1.0, 1.0], w, &rho).unwrap().q;
        simplex_worst = simplex_worst.max(dist(&q, &[w / 2.0, w / 2.0]));
        simplex_worst = simplex_worst.max(dist(&allocator::allocate(&simplex, 0, &q, &lin).unwrap().c, &rho));
    }
    outcome(worst < 1e-6 && simplex_worst < 1e-8, format!("MAC max {worst:.2e} (< 1e-6), simplex closed form {simplex_worst:.2e} (< 1e-8)"))
}

// 5 -------------------------------------------------------------------------

fn full_utilization() -> Outcome {
    let cfg = bundled();
    let region = cfg.capacity_region().unwrap();
    let u = cfg.utility_family().unwrap();
    let mu = cfg.traffic.mu.clone();
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..region.state_count() {
        let rho = capacity::balanced_point(&region, i).unwrap().rates;
        let target: f64 = rho.iter().sum();
        for w in [1.0, 4.0] {
            let qs = dual_cost::fixed_point(&u, &mu, w, &rho).unwrap().q;
            for _ in 0..100 {
                // uniform in the disk of radius 0.01 w
                let (rad, ang) = (0.01 * w * r.random::<f64>().sqrt(), r.random_range(0.0..std::f64::consts::TAU));
                let q = [qs[0] + rad * ang.cos(), qs[1] + rad * ang.sin()];
                let c = allocator::allocate(&region, i, &q, &u).unwrap().c;
                worst = worst.max((c.iter().sum::<f64>() - target).abs());
            }
        }
    }
    outcome(worst < 1e-4, format!("max |ΣΛ − Σρ| = {worst:.2e} over 2 states × 2 workloads × 100 probes (< 1e-4)"))
}

// 6 -------------------------------------------------------------------------

fn mm1_oracle() -> Outcome {
    let region = CapacityRegion::simplex(1, &[1.0]).unwrap();
    let u = UtilityFamily::linear_log(&[1.0]);
    let mut policy = PolicyHandle::fixed(&region, &u, vec![vec![1.0]]).unwrap();
    let traffic = TrafficSpec::markovian(vec![vec![0.5]], vec![1.0]);
    let horizon = 1e6;
    let traj = queue_sim::simulate(&traffic, &mut policy, &EnvPath::constant(0, horizon), SimSettings::new(horizon, 1.0), SeedStreams::new(6)).unwrap();
    let q: Vec<f64> = (1..traj.len()).map(|k| traj.queue(k)[0] as f64).collect();
    let est = stats::batch_means(&q, 100);
    let exact = 0.5 / (1.0 - 0.5);
    outcome((est.mean - exact).abs() < 3.0 * est.se, format!("mean Q = {:.4} ± {:.4} (batch means), oracle {exact}", est.mean, est.se))
}

// 7 -------------------------------------------------------------------------

fn skorohod_complementarity() -> Outcome {
    let cfg = bundled();
    let region = cfg.capacity_region().unwrap();
    let gen = cfg.generator().unwrap();
    let mut spec = cfg.rdrs_spec(&region).unwrap();
    spec.output_step = None;
    let mut worst_neg: f64 = 0.0;
    let mut worst_dec: f64 = 0.0;
    let mut worst_push: f64 = 0.0;
    let mut all_ok = true;
    let paths = rdrs::ensemble(&spec, &gen, 0, 7, 200).unwrap();
    for p in &paths {
        all_ok &= p.y[0] == 0.0 && p.checks.complementarity_holds();
        worst_neg = worst_neg.max(-p.w.iter().cloned().fold(f64::INFINITY, f64::min));
        for k in 1..p.w.len() {
            worst_dec = worst_dec.max(p.y[k - 1] - p.y[k]);
            if p.y[k] > p.y[k - 1] {
                worst_push = worst_push.max(p.w[k] - p.checks.reflect_tol);
            }
        }
    }
    // zero noise, drift −1: X = −t, Y = t, W ≡ 0
    let det = RdrsSpec { theta: vec![vec![-1.0]], gamma_e: vec![vec![0.0]], gamma_s: vec![vec![0.0]], mu: vec![1.0], dt: 1e-3, horizon: 2.0, output_step: None, reflect: true };
    let d = rdrs::simulate_rdrs(&det, &EnvPath::constant(0, 2.0), SeedStreams::new(1)).unwrap();
    let exact = d.w.iter().all(|&w| w == 0.0);
    let ok = all_ok && worst_neg <= 0.0 && worst_dec <= 0.0 && worst_push <= 0.0 && exact;
    outcome(ok, format!("200 paths: min Ŵ excess {:.1e}, max Ŷ decrease {worst_dec:.1e}, max push excess {:.1e}; zero-noise Ŵ ≡ 0: {exact}", -worst_neg, worst_push.max(0.0)))
}

// 8 -------------------------------------------------------------------------

fn rbm_stationary_mean() -> Outcome {
    let gen = markov_env::build_generator(&[1.0], &[vec![0.0]]).unwrap();
    // discrete reflection overshoots by about 0.58 σ √dt; this step keeps the bias under 2 %
    let spec = RdrsSpec { theta: vec![vec![-1.0]], gamma_e: vec![vec![0.5]], gamma_s: vec![vec![0.5]], mu: vec![1.0], dt: 2.5e-4, horizon: 200.0, output_step: Some(1.0), reflect: true };
    let paths = rdrs::ensemble(&spec, &gen, 0, 8, 200).unwrap();
    let avg: Vec<f64> = paths.iter().map(|p| p.w_time_average).collect();
    let est = stats::estimate(&avg);
    // stationary RBM is exponential with mean σ²/(2|a|)
    let exact = 1.0 / 2.0;
    let rel = (est.mean - exact).abs() / exact;
    outcome(rel < 0.05, format!("time-averaged Ŵ = {:.4} ± {:.4}, oracle {exact}, relative error {:.2}% (< 5%)", est.mean, est.se, 100.0 * rel))
}

// 9-12 ----------------------------------------------------------------------

struct Ladder {
    rows: Vec<SweepRow>,
    fluid_descent: Vec<f64>,
    workload: Vec<heavy_traffic::PolicyWorkload>,
    sweep_time: Duration,
    workload_time: Duration,
}

fn non_increasing(est: &[(f64, Estimate)]) -> bool {
    est.windows(2).all(|w| w[1].1.mean - w[0].1.mean <= (w[0].1.se.powi(2) + w[1].1.se.powi(2)).sqrt())
}

fn fmt_ladder(est: &[(f64, Estimate)]) -> String {
    est.iter().map(|(r, e)| format!("r={r}: {:.3}±{:.3}", e.mean, e.se)).collect::<Vec<_>>().join(", ")
}

fn run_ladder(cfg: &ExperimentConfig, spec: &HeavyTrafficSpec, region: &CapacityRegion, u: &UtilityFamily, gen: &EnvGenerator) -> Ladder {
    let run = HeavyTrafficRun::new(spec, region, u, gen, cfg.environment.initial_state, cfg.seed).unwrap();
    let t = Instant::now();
    let rows = run.sweep(PolicyKind::UtilityMax).unwrap();
    let fluid_descent = run.fluid_descent(32.0, cfg.heavy_traffic.fluid_start.as_deref().unwrap()).unwrap();
    let sweep_time = t.elapsed();
    let t = Instant::now();
    let workload = run.workload_comparison(32.0, &[PolicyKind::UtilityMax, PolicyKind::MaxWeight, PolicyKind::StaticRho]).unwrap().rows;
    Ladder { rows, fluid_descent, workload, sweep_time, workload_time: t.elapsed() }
}

fn fluid_limit(l: &Ladder) -> Outcome {
    let sup = heavy_traffic::per_scale(&l.rows, |r| r.sup_fluid);
    let psi = stats::estimate(&l.fluid_descent);
    let ok = sup.len() == 4 && non_increasing(&sup) && psi.mean <= 3.0 * psi.se && l.sweep_time < Duration::from_secs(600);
    outcome(ok, format!("sup‖Q̄‖ {}; within-interval Δψ = {:.4} ± {:.4} (≤ 3 s.e.), {:.0?}", fmt_ladder(&sup), psi.mean, psi.se, l.sweep_time))
}

fn state_space_collapse(l: &Ladder) -> Outcome {
    let sup = heavy_traffic::per_scale(&l.rows, |r| r.sup_collapse);
    let ratio = sup.last().unwrap().1.mean / sup[0].1.mean;
    let ok = non_increasing(&sup) && ratio < 0.5 && l.sweep_time < Duration::from_secs(900);
    outcome(ok, format!("sup-collapse {}; metric(32)/metric(4) = {ratio:.3} (< 0.5)", fmt_ladder(&sup)))
}

fn workload_minimality(l: &Ladder) -> Outcome {
    let mut ok = l.workload_time < Duration::from_secs(900);
    let mut parts = Vec::new();
    for row in &l.workload {
        if row.policy != PolicyKind::UtilityMax.name() {
            ok &= row.diff_vs_utility_max.mean >= -3.0 * row.diff_vs_utility_max.se;
            parts.push(format!("{} − utility-max = {:.4} ± {:.4}", row.policy, row.diff_vs_utility_max.mean, row.diff_vs_utility_max.se));
        }
    }
    ok &= parts.len() == 2;
    outcome(ok, format!("r = 32, 20 paired seeds: {}", parts.join("; ")))
}

fn rdrs_consistency(cfg: &ExperimentConfig, spec: &HeavyTrafficSpec, region: &CapacityRegion, u: &UtilityFamily, gen: &EnvGenerator) -> Outcome {
    let t_probe = spec.horizon / 2.0;
    let run = HeavyTrafficRun::new(spec, region, u, gen, cfg.environment.initial_state, cfg.seed).unwrap();
    let sim = experiment::simulated_workload_at(&run, 32.0, cfg.rdrs.simulation_replicas, t_probe).unwrap();
    let rspec = cfg.rdrs_spec(region).unwrap();
    let paths = rdrs::ensemble(&rspec, gen, cfg.environment.initial_state, cfg.seed ^ experiment::RDRS_SEED_SALT, 200).unwrap();
    let diff: Vec<f64> = paths.iter().map(|p| p.w_at(t_probe)).collect();
    let ks = stats::ks_statistic(&diff, &sim);
    // two-sample KS critical value at level α: c(α) √((n + m)/(nm)), c(α) = √(−ln(α/2)/2)
    let (n, m) = (diff.len() as f64, sim.len() as f64);
    let critical = (-(0.01f64 / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt();
    outcome(sim.len() >= 20 && ks < critical, format!("KS = {ks:.4} < {critical:.4} (1%), {} simulated replicas vs {} diffusion paths", sim.len(), diff.len()))
}

// 13 ------------------------------------------------------------------------

fn mimo_boundary() -> Outcome {
    let h = [Complex64::new(0.9, 0.3), Complex64::new(0.4, -0.8)];
    let p = [1.0, 1.5];
    let g = scalar_mac_bounds(h, p);
    let ch = ChannelSet::scalar(&[h.to_vec()]).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..21 {
        let x = k as f64 / 20.0;
        let nu = PriorityVector::normalized(&[x.max(1e-9), (1.0 - x).max(1e-9)]).unwrap();
        let c = mimo::mac_boundary_point(&ch, &p, 0, &nu).unwrap().rates;
        let h_vals = [c[0] - g[0], c[1] - g[1], c[0] + c[1] - g[2]];
        let infeasible = h_vals.iter().cloned().fold(0.0, f64::max);
        // the sum facet, and off the tie the single-user facet of the user decoded last
        let mut active = h_vals[2].abs();
        if (2.0 * x - 1.0).abs() > 1e-9 {
            active = active.max(if x > 0.5 { h_vals[0].abs() } else { h_vals[1].abs() });
        }
        worst = worst.max(infeasible).max(active);
    }
    // chord test of f on random 2×2 channels and covariances
    let mut r = rng(13);
    let mut chord: f64 = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let ch = ChannelSet::new(vec![(0..2).map(|_| CMatrix::from_fn(2, 2, |_, _| gaussian(&mut r))).collect()]).unwrap();
        let nu = PriorityVector::normalized(&[r.random_range(0.05..1.0), r.random_range(0.05..1.0)]).unwrap();
        let psd = |r: &mut ChaCha8Rng| {
            let a = CMatrix::from_fn(2, 2, |_, _| gaussian(r));
            &a * a.adjoint()
        };
        let a = CovarianceProfile { gammas: vec![psd(&mut r), psd(&mut r)] };
        let b = CovarianceProfile { gammas: vec![psd(&mut r), psd(&mut r)] };
        let t: f64 = r.random();
        let mix = CovarianceProfile { gammas: (0..2).map(|j| &a.gammas[j] * Complex64::from(t) + &b.gammas[j] * Complex64::from(1.0 - t)).collect() };
        let f = |p: &CovarianceProfile| mimo::weighted_sum_rate(&ch, 0, &nu, p).unwrap();
        chord = chord.max(t * f(&a) + (1.0 - t) * f(&b) - f(&mix));
    }
    outcome(worst < 1e-6 && chord <= 1e-9, format!("max |g_k| on active facets {worst:.2e} (< 1e-6) over 21 weights; worst chord excess {chord:.2e} over 1000 trials"))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let elapsed = t.elapsed();
        let passed = out.passed && elapsed <= limit;
        if !passed {
            failures += 1;
        }
        let late = if elapsed > limit { format!(" [over the {limit:?} budget]") } else { String::new() };
        println!("{} {id:>2} {name}: {} ({:.2?}){late}", if passed { "PASS" } else { "FAIL" }, out.detail, elapsed);
    };
    report(1, "facet count", Duration::from_secs(1), &mut facet_count);
    report(2, "KKT certification", Duration::from_secs(60), &mut kkt_certification);
    report(3, "radial homogeneity", Duration::from_secs(10), &mut radial_homogeneity);
    report(4, "duality round trip", Duration::from_secs(10), &mut duality_round_trip);
    report(5, "full utilization", Duration::from_secs(30), &mut full_utilization);
    report(6, "M/M/1 oracle", Duration::from_secs(60), &mut mm1_oracle);
    report(7, "Skorohod complementarity", Duration::from_secs(10), &mut skorohod_complementarity);
    report(8, "RBM stationary mean", Duration::from_secs(60), &mut rbm_stationary_mean);

    let cfg = bundled();
    let region = cfg.capacity_region().unwrap();
    let u = cfg.utility_family().unwrap();
    let gen = cfg.generator().unwrap();
    let spec = cfg.heavy_traffic_spec(&region).unwrap();
    let mut ladder = None;
    report(9, "fluid limit", Duration::from_secs(600), &mut || {
        let l = run_ladder(&cfg, &spec, &region, &u, &gen);
        let out = fluid_limit(&l);
        ladder = Some(l);
        out
    });
    let ladder = ladder.expect("ladder ran");
    report(10, "state-space collapse", Duration::from_secs(900), &mut || state_space_collapse(&ladder));
    report(11, "workload minimality", Duration::from_secs(900), &mut || workload_minimality(&ladder));
    report(12, "RDRS consistency", Duration::from_secs(900), &mut || rdrs_consistency(&cfg, &spec, &region, &u, &gen));
    report(13, "MIMO boundary", Duration::from_secs(120), &mut mimo_boundary);

    println!("{} of 13 criteria passed", 13 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
