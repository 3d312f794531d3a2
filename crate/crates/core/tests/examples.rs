//! Worked examples with closed-form or hand-computed oracles.

use num_complex::Complex64;
use rsq_core::allocator;
use rsq_core::capacity::{self, CapacityRegion, Membership};
use rsq_core::dual_cost;
use rsq_core::heavy_traffic::{self, HeavyTrafficRun, HeavyTrafficSpec};
use rsq_core::markov_env::{self, EnvPath};
use rsq_core::mimo::{self, CMatrix, ChannelSet, CovarianceProfile, PowerBudget, PriorityVector};
use rsq_core::queue_sim::{self, PolicyHandle, PolicyKind, SimSettings, TrafficSpec};
use rsq_core::rdrs::{self, RdrsSpec};
use rsq_core::rng::SeedStreams;
use rsq_core::stats;
use rsq_core::utility::{QueueWeight, RateUtility, UtilityFamily};

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

type M2 = [[Complex64; 2]; 2];

fn outer(h: [Complex64; 2], p: f64) -> M2 {
    // H†PH for a 1×2 row H
    let mut m = [[cx(0.0, 0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            m[a][b] = h[a].conj() * h[b] * p;
        }
    }
    m
}

fn add(a: M2, b: M2) -> M2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn eye_plus(a: M2) -> M2 {
    add(a, [[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(1.0, 0.0)]])
}

fn det(a: M2) -> f64 {
    (a[0][0] * a[1][1] - a[0][1] * a[1][0]).re
}

fn inv(a: M2) -> M2 {
    let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

fn mul(a: M2, b: M2) -> M2 {
    let mut m = [[cx(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

/// Two single-antenna users, two base antennas.
fn example_channels() -> ([Complex64; 2], [Complex64; 2], [f64; 2], ChannelSet) {
    let h1 = [cx(1.0, 0.2), cx(0.4, -0.3)];
    let h2 = [cx(-0.2, 0.7), cx(0.9, 0.1)];
    let p = [1.5, 0.8];
    let ch = ChannelSet::new(vec![vec![CMatrix::from_row_slice(1, 2, &h1), CMatrix::from_row_slice(1, 2, &h2)]]).unwrap();
    (h1, h2, p, ch)
}

#[test]
fn mac_example_sum_capacity_and_vertex() {
    let (h1, h2, p, ch) = example_channels();
    let a = outer(h1, p[0]);
    let b = outer(h2, p[1]);
    let cu = det(eye_plus(add(a, b))).ln();
    let g1 = det(eye_plus(a)).ln();
    // printed third constraint: c_2 at the vertex where user 1 is decoded last
    let g3 = det(eye_plus(mul(inv(eye_plus(a)), b))).ln();

    let region = mimo::mac_region(&ch, &p).unwrap();
    assert!((capacity::sum_capacity(&region, 0).unwrap() - cu).abs() < 1e-9);
    let nu = PriorityVector::normalized(&[0.9, 0.1]).unwrap();
    let c = mimo::mac_boundary_point(&ch, &p, 0, &nu).unwrap().rates;
    assert!((c[0] - g1).abs() < 1e-6, "{c:?} vs g1 = {g1}");
    assert!((c[1] - g3).abs() < 1e-6, "{c:?} vs g3 = {g3}");
    assert!((g1 + g3 - cu).abs() < 1e-12);
    // two single-user facets plus the sum facet
    assert_eq!(region.state(0).unwrap().facets.len(), 3);
    assert_eq!(capacity::facet_count(2).unwrap().surface, 3);
}

#[test]
fn facet_count_examples() {
    let f = |j| capacity::facet_count(j).unwrap();
    assert_eq!((f(1).total, f(2).total, f(2).surface, f(3).total, f(3).surface), (2, 5, 3, 16, 13));
}

#[test]
fn membership_examples() {
    let (h1, h2, p, ch) = example_channels();
    let region = mimo::mac_region(&ch, &p).unwrap();
    assert_eq!(capacity::membership(&region, 0, &[0.0, 0.0]).unwrap(), Membership::Interior);
    // midpoint of the dominant face: only the sum facet is tight
    let cu = det(eye_plus(add(outer(h1, p[0]), outer(h2, p[1])))).ln();
    let g1 = det(eye_plus(outer(h1, p[0]))).ln();
    let g2 = det(eye_plus(outer(h2, p[1]))).ln();
    let mid = [(g1 + cu - g2) / 2.0, (cu - g1 + g2) / 2.0];
    assert_eq!(capacity::membership(&region, 0, &mid).unwrap(), Membership::Boundary);
    // this channel is too asymmetric for an equal split
    assert!(capacity::balanced_point(&region, 0).is_err());

    let sym = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(1.0, 0.0)]]).unwrap();
    let region = mimo::mac_region(&sym, &[1.0, 1.0]).unwrap();
    let rho = capacity::balanced_point(&region, 0).unwrap();
    assert_eq!(capacity::membership(&region, 0, &rho.rates).unwrap(), Membership::Boundary);
    let twice: Vec<f64> = rho.rates.iter().map(|x| 2.0 * x).collect();
    assert_eq!(capacity::membership(&region, 0, &twice).unwrap(), Membership::Outside);
}

#[test]
fn symmetric_mac_balanced_point() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(0.0, 1.0)]]).unwrap();
    let region = mimo::mac_region(&ch, &[2.0, 2.0]).unwrap();
    let c = 5f64.ln();
    let rho = capacity::balanced_point(&region, 0).unwrap();
    assert!((rho.rates[0] - c / 2.0).abs() < 1e-9 && (rho.rates[1] - c / 2.0).abs() < 1e-9);
}

#[test]
fn reduced_mac_regions() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(0.5, 0.0)]]).unwrap();
    let region = mimo::mac_region(&ch, &[1.0, 1.0]).unwrap();
    let red = capacity::reduce(&region, 0, &[1]).unwrap();
    assert_eq!(red.kept, vec![0]);
    assert!((red.region.axis_extent(0) - 2f64.ln()).abs() < 1e-9);

    let ch3 = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(0.5, 0.0), cx(0.8, 0.0)]]).unwrap();
    let r3 = mimo::mac_region(&ch3, &[1.0, 1.0, 1.0]).unwrap();
    let red3 = capacity::reduce(&r3, 0, &[2]).unwrap();
    let sub = CapacityRegion::new(2, vec![red3.region]).unwrap();
    assert!(capacity::sum_capacity(&sub, 0).unwrap() <= capacity::sum_capacity(&r3, 0).unwrap() + 1e-9);
}

#[test]
fn single_user_boundary_point() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0)]]).unwrap();
    let b = mimo::mac_boundary_point(&ch, &[1.0], 0, &PriorityVector::uniform(1)).unwrap();
    assert!((b.rates[0] - 2f64.ln()).abs() < 1e-9);
    assert!((b.profile.traces()[0] - 1.0).abs() < 1e-9);
}

#[test]
fn weighted_sum_rate_examples() {
    let (h1, h2, p, ch) = example_channels();
    let prof = CovarianceProfile::isotropic(&p, 1);
    let f = |nu: &[f64]| mimo::weighted_sum_rate(&ch, 0, &PriorityVector::new(nu.to_vec()).unwrap(), &prof).unwrap();
    assert!((f(&[1.0, 0.0]) - det(eye_plus(outer(h1, p[0]))).ln()).abs() < 1e-12);
    assert!((f(&[0.5, 0.5]) - 0.5 * det(eye_plus(add(outer(h1, p[0]), outer(h2, p[1])))).ln()).abs() < 1e-12);
    assert_eq!(mimo::weighted_sum_rate(&ch, 0, &PriorityVector::uniform(2), &CovarianceProfile::zero(2, 1)).unwrap(), 0.0);
}

#[test]
fn top_priority_user_gets_its_single_user_rate() {
    let (h1, _, p, ch) = example_channels();
    let c = mimo::mac_boundary_point(&ch, &p, 0, &PriorityVector::new(vec![1.0, 0.0]).unwrap()).unwrap().rates;
    assert!((c[0] - det(eye_plus(outer(h1, p[0]))).ln()).abs() < 1e-6);
}

#[test]
fn continuity_probe_examples() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(1.0, 0.0)]]).unwrap();
    let budget = PowerBudget::PerUser(vec![1.0, 1.0]);
    let nu = PriorityVector::normalized(&[0.6, 0.4]).unwrap();
    assert_eq!(mimo::boundary_continuity_probe(&ch, 0, &budget, &nu, 0.0).unwrap().displacement, 0.0);
    assert!(mimo::boundary_continuity_probe(&ch, 0, &budget, &nu, 1e-3).unwrap().displacement <= 0.1);
}

#[test]
fn broadcast_examples() {
    let single = ChannelSet::scalar(&[vec![cx(0.8, 0.6)]]).unwrap();
    let r1 = mimo::bc_region(&single, 3.0, 8).unwrap();
    assert!((capacity::sum_capacity(&r1, 0).unwrap() - 4f64.ln()).abs() < 1e-6);

    let sym = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(1.0, 0.0)]]).unwrap();
    let grid = mimo::priority_grid(2, 10);
    let cloud = mimo::bc_region_points(&sym, 2.0, 0, 10, &grid).unwrap();
    for p in &cloud.envelope {
        let swapped = [p.rates[1], p.rates[0]];
        let near = cloud.envelope.iter().map(|q| ((q.rates[0] - swapped[0]).powi(2) + (q.rates[1] - swapped[1]).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
        assert!(near < 0.05, "no mirror image of {:?}", p.rates);
    }
    for (_, p) in &cloud.all {
        assert!(cloud.envelope.iter().any(|e| e.rates.iter().zip(&p.rates).all(|(a, b)| *a >= b - 1e-9)));
    }
}

#[test]
fn single_nonempty_queue_gets_single_user_rate() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(0.5, 0.0)]]).unwrap();
    let region = mimo::mac_region(&ch, &[1.0, 1.0]).unwrap();
    let a = allocator::allocate(&region, 0, &[3.0, 0.0], &UtilityFamily::linear_log(&[1.0, 1.0])).unwrap();
    assert!((a.c[0] - 2f64.ln()).abs() < 1e-7 && a.c[1] == 0.0);
}

#[test]
fn homogeneity_with_quadratic_weights() {
    let u = UtilityFamily { weights: vec![QueueWeight::Power { weight: 1.0, beta: 2.0 }; 2], rate: RateUtility::Log1p };
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(0.5, 0.0)]]).unwrap();
    let region = mimo::mac_region(&ch, &[1.0, 1.0]).unwrap();
    assert!(allocator::is_radially_homogeneous(&region, 0, &u, &[1.0, 2.0], 3.0).unwrap().holds);
    let simplex = CapacityRegion::simplex(2, &[2.0]).unwrap();
    let h = allocator::is_radially_homogeneous(&simplex, 0, &UtilityFamily::linear_log(&[1.0, 1.0]), &[1.0, 2.0], 7.0).unwrap();
    assert!(h.discrepancy < 1e-9);
}

#[test]
fn dual_cost_examples() {
    let u = UtilityFamily::linear_log(&[1.0, 1.0]);
    let fp = dual_cost::fixed_point(&u, &[1.0, 2.0], 3.0, &[1.0, 1.0]).unwrap();
    assert!((fp.q[0] - fp.q[1]).abs() < 1e-9);
    let base = dual_cost::lyapunov(&u, &[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0]);
    assert!(dual_cost::lyapunov(&u, &[1.0, 1.0], &[1.1, 2.0], &[1.0, 1.0]) > base);
    assert!(dual_cost::lyapunov(&u, &[1.0, 1.0], &[1.0, 2.1], &[1.0, 1.0]) > base);
}

#[test]
fn duality_on_the_symmetric_mac() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(1.0, 0.0)]]).unwrap();
    let region = mimo::mac_region(&ch, &[1.0, 1.0]).unwrap();
    let u = UtilityFamily::linear_log(&[1.0, 1.0]);
    assert!(dual_cost::duality_roundtrip(&region, 0, &u, &[1.0, 1.0], 4.0).unwrap() < 1e-6);
    let probe = dual_cost::full_utilization_check(&region, 0, &u, &[1.0, 1.0], 4.0, 0.0, 0, 1e-3, SeedStreams::new(1)).unwrap();
    assert!(probe.gap < 1e-7);
    let probe = dual_cost::full_utilization_check(&region, 0, &u, &[1.0, 1.0], 4.0, 0.04, 100, 1e-3, SeedStreams::new(1)).unwrap();
    assert!(probe.gap < 1e-4 && probe.samples == 100);
}

#[test]
fn deterministic_packet_leaves_after_length_over_rate() {
    let region = CapacityRegion::simplex(1, &[1.0]).unwrap();
    let u = UtilityFamily::linear_log(&[1.0]);
    let mut policy = PolicyHandle::fixed(&region, &u, vec![vec![1.0]]).unwrap();
    // mean length 2 bits with vanishing spread
    let traffic = TrafficSpec { arrival_rates: vec![vec![0.0]], arrival_scv: vec![vec![1.0]], mu: vec![0.5], size_scv: vec![1e-14] };
    let settings = SimSettings { horizon: 5.0, grid_step: 0.5, record_events: true };
    let traj = queue_sim::simulate_from(&traffic, &mut policy, &EnvPath::constant(0, 5.0), settings, SeedStreams::new(3), Some(&[1])).unwrap();
    let dep: Vec<f64> = traj.events.iter().filter(|e| e.kind == queue_sim::EventKind::Departure).map(|e| e.time).collect();
    assert_eq!(dep.len(), 1);
    assert!((dep[0] - 2.0).abs() < 1e-5, "{dep:?}");
}

#[test]
fn saturated_policy_leaves_no_unused_capacity_while_busy() {
    let region = CapacityRegion::simplex(1, &[1.0]).unwrap();
    let u = UtilityFamily::linear_log(&[1.0]);
    let mut policy = PolicyHandle::fixed(&region, &u, vec![vec![1.0]]).unwrap();
    let traffic = TrafficSpec::markovian(vec![vec![0.7]], vec![1.0]);
    let traj = queue_sim::simulate(&traffic, &mut policy, &EnvPath::constant(0, 500.0), SimSettings::new(500.0, 0.25), SeedStreams::new(5)).unwrap();
    for k in 1..traj.len() {
        if traj.queue(k - 1)[0] > 0 && traj.queue(k)[0] > 0 && traj.served(k)[0] - traj.served(k - 1)[0] >= 0.25 - 1e-12 {
            assert!((traj.unused[k] - traj.unused[k - 1]).abs() < 1e-9);
        }
        let y = traj.times[k] - traj.served(k)[0];
        assert!((traj.unused[k] - y).abs() < 1e-9);
    }
}

#[test]
fn mm1_mean_queue_oracle() {
    // λ = 0.5, μ = 1, rate 1 when busy: E[Q] = ρ/(1 − ρ) = 1
    let region = CapacityRegion::simplex(1, &[1.0]).unwrap();
    let u = UtilityFamily::linear_log(&[1.0]);
    let mut policy = PolicyHandle::fixed(&region, &u, vec![vec![1.0]]).unwrap();
    let traffic = TrafficSpec::markovian(vec![vec![0.5]], vec![1.0]);
    let horizon = 2e5;
    let traj = queue_sim::simulate(&traffic, &mut policy, &EnvPath::constant(0, horizon), SimSettings::new(horizon, 1.0), SeedStreams::new(11)).unwrap();
    let q: Vec<f64> = (1..traj.len()).map(|k| traj.queue(k)[0] as f64).collect();
    let est = stats::batch_means(&q, 50);
    assert!((est.mean - 1.0).abs() < 3.0 * est.se, "{est:?}");
    assert!((traj.queue_area[0] / horizon - 1.0).abs() < 3.0 * est.se);
}

#[test]
fn scaled_workload_and_fluid_paths_are_consistent() {
    let ch = ChannelSet::scalar(&[vec![cx(1.0, 0.0), cx(1.0, 0.0)]]).unwrap();
    let region = mimo::mac_region(&ch, &[1.0, 1.0]).unwrap();
    let u = UtilityFamily::linear_log(&[1.0, 1.0]);
    let gen = markov_env::build_generator(&[1.0], &[vec![0.0]]).unwrap();
    let mu = vec![1.0, 2.0];
    let spec = HeavyTrafficSpec {
        lambda: heavy_traffic::nominal_rates(&region, &mu).unwrap(),
        theta: vec![vec![-0.5], vec![-0.5]],
        arrival_scv: vec![vec![1.0], vec![1.0]],
        mu: mu.clone(),
        size_scv: vec![1.0, 1.0],
        scales: vec![6.0],
        replicas: 2,
        horizon: 2.0,
        grid_step: 0.05,
    };
    let run = HeavyTrafficRun::new(&spec, &region, &u, &gen, 0, 4).unwrap();
    let a = run.replica(6.0, PolicyKind::UtilityMax, 0, None).unwrap();
    let b = run.replica(6.0, PolicyKind::UtilityMax, 0, None).unwrap();
    assert_eq!(a, b);
    for k in 0..a.len() {
        let w: f64 = a.q_hat(k).iter().zip(&mu).map(|(q, m)| q / m).sum();
        assert!((w - a.w_hat[k]).abs() < 1e-12);
        for (f, d) in a.q_bar(k).iter().zip(a.q_hat(k)) {
            assert_eq!(*f, d / 6.0);
        }
    }
}

#[test]
fn sequence_example() {
    let spec = HeavyTrafficSpec {
        lambda: vec![vec![1.0]],
        theta: vec![vec![-0.5]],
        arrival_scv: vec![vec![1.0]],
        mu: vec![1.0],
        size_scv: vec![1.0],
        scales: vec![10.0],
        replicas: 1,
        horizon: 1.0,
        grid_step: 0.1,
    };
    assert!((spec.traffic_at(10.0).unwrap().arrival_rates[0][0] - 0.95).abs() < 1e-15);
}

#[test]
fn scaled_environment_has_the_law_of_the_compressed_one() {
    // jump counts over [0, T] of the base chain vs over [0, r²T] of the slowed chain
    let gen = markov_env::build_generator(&[1.0, 1.0], &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let r = 5.0;
    let slow = markov_env::scale_holding(&gen, r).unwrap();
    let n = 2000;
    let bins = 7;
    let count = |g: &markov_env::EnvGenerator, horizon: f64, salt: u64| -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for s in 0..n {
            let p = markov_env::sample_path(g, horizon, 0, SeedStreams::new(salt).replica(s)).unwrap();
            h[p.jump_count().min(bins - 1)] += 1.0;
        }
        h
    };
    let a = count(&gen, 2.0, 1);
    let b = count(&slow, 2.0 * r * r, 2);
    // two-sample chi-squared homogeneity test, 6 degrees of freedom, 1% level
    let chi2: f64 = (0..bins)
        .map(|k| {
            let e = (a[k] + b[k]) / 2.0;
            if e == 0.0 { 0.0 } else { (a[k] - e).powi(2) / e + (b[k] - e).powi(2) / e }
        })
        .sum();
    assert!(chi2 < 16.812, "chi2 = {chi2}, {a:?} vs {b:?}");
}

#[test]
fn occupation_matches_stationary_distribution() {
    let gen = markov_env::build_generator(&[2.0, 1.0], &[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let pi = markov_env::stationary_distribution(&gen).unwrap();
    assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12);
    let fractions: Vec<f64> = (0..200)
        .map(|s| {
            let p = markov_env::sample_path(&gen, 100.0, 0, SeedStreams::new(9).replica(s)).unwrap();
            p.occupation(2)[0] / 100.0
        })
        .collect();
    let est = stats::estimate(&fractions);
    assert!((est.mean - pi[0]).abs() < 3.0 * est.se, "{est:?}");
}

fn single_state_spec(drift: f64, var: f64, dt: f64, horizon: f64, reflect: bool) -> RdrsSpec {
    RdrsSpec { theta: vec![vec![drift]], gamma_e: vec![vec![var / 2.0]], gamma_s: vec![vec![var / 2.0]], mu: vec![1.0], dt, horizon, output_step: Some(horizon / 10.0), reflect }
}

#[test]
fn free_process_moments() {
    let gen = markov_env::build_generator(&[1.0], &[vec![0.0]]).unwrap();
    let spec = single_state_spec(-0.5, 2.0, 1e-2, 4.0, false);
    let paths = rdrs::ensemble(&spec, &gen, 0, 21, 400).unwrap();
    let x: Vec<f64> = paths.iter().map(|p| *p.x.last().unwrap()).collect();
    let m = stats::estimate(&x);
    assert!((m.mean + 2.0).abs() < 3.0 * m.se, "{m:?}");
    // Var of the sample variance of normals is 2σ⁴/(n−1)
    let v = stats::variance(&x);
    assert!((v - 8.0).abs() < 3.0 * (2.0 * 64.0 / 399.0f64).sqrt(), "{v}");
}

#[test]
fn halving_the_step_keeps_the_mean() {
    let gen = markov_env::build_generator(&[1.0], &[vec![0.0]]).unwrap();
    let coarse = rdrs::ensemble(&single_state_spec(-1.0, 1.0, 4e-3, 3.0, true), &gen, 0, 31, 400).unwrap();
    let fine = rdrs::ensemble(&single_state_spec(-1.0, 1.0, 2e-3, 3.0, true), &gen, 0, 32, 400).unwrap();
    let a: Vec<f64> = coarse.iter().map(|p| *p.w.last().unwrap()).collect();
    let b: Vec<f64> = fine.iter().map(|p| *p.w.last().unwrap()).collect();
    let (ea, eb) = (stats::estimate(&a), stats::estimate(&b));
    let se = (ea.se.powi(2) + eb.se.powi(2)).sqrt();
    assert!((ea.mean - eb.mean).abs() < 3.0 * se, "{ea:?} vs {eb:?}");
}

#[test]
fn split_halves_pass_the_ks_test() {
    let gen = markov_env::build_generator(&[1.0], &[vec![0.0]]).unwrap();
    let paths = rdrs::ensemble(&single_state_spec(-1.0, 1.0, 1e-2, 2.0, true), &gen, 0, 41, 400).unwrap();
    let w: Vec<f64> = paths.iter().map(|p| *p.w.last().unwrap()).collect();
    let mut passed = 0;
    for split in 0..20 {
        let (a, b): (Vec<(usize, f64)>, Vec<(usize, f64)>) = w.iter().copied().enumerate().partition(|(k, _)| (k * 7 + split * 13) % 40 < 20);
        let a: Vec<f64> = a.into_iter().map(|x| x.1).collect();
        let b: Vec<f64> = b.into_iter().map(|x| x.1).collect();
        if rdrs::compare_to_simulation(&a, &b, 2.0, 0.05).unwrap().below_critical {
            passed += 1;
        }
    }
    assert!(passed >= 18, "{passed} of 20");
}

#[test]
fn lifted_queues_carry_the_workload() {
    let gen = markov_env::build_generator(&[1.0], &[vec![0.0]]).unwrap();
    let path = &rdrs::ensemble(&single_state_spec(-1.0, 1.0, 1e-2, 2.0, true), &gen, 0, 51, 1).unwrap()[0];
    let u = UtilityFamily::linear_log(&[1.0, 1.0]);
    let mu = [1.0, 2.0];
    let q = rdrs::lift_to_queues(path, &u, &mu, &[vec![1.0, 0.5]]).unwrap();
    for (qk, w) in q.iter().zip(&path.w) {
        assert!((qk[0] / mu[0] + qk[1] / mu[1] - w).abs() < 1e-8);
    }
}
