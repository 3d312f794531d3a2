//! Event-driven simulation of the parallel queues.
//!
//! Between events the queue vector and the environment state are constant, so
//! the policy rate vector is too; the next event is the earliest of the next
//! arrival of any user, the next head-of-line completion at the current
//! rates, and the next environment switch. Service is measured in bits and
//! only the head-of-line packet of each queue is in service.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, RwLock};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{AllocError, Allocator};
use crate::capacity::{self, CapacityError, CapacityRegion};
use crate::markov_env::EnvPath;
use crate::rng::{Purpose, SeedStreams};
use crate::utility::UtilityFamily;

/// Allowed facet violation of a policy rate before the run aborts.
pub const RATE_FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error("policy returned infeasible rates {rates:?} in state {state} at t = {time} (violation {violation:e})")]
    InfeasibleRate { time: f64, state: usize, rates: Vec<f64>, violation: f64 },
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
}

/// Arrival and packet-size parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSpec {
    /// `λ_j(i)` indexed `[user][state]`; 0 disables a user in that state.
    pub arrival_rates: Vec<Vec<f64>>,
    /// Interarrival SCV `α_j²(i)`, indexed `[user][state]`.
    pub arrival_scv: Vec<Vec<f64>>,
    /// `μ_j`, the reciprocal of the mean packet length in bits.
    pub mu: Vec<f64>,
    /// Packet-length SCV `β_j²`.
    pub size_scv: Vec<f64>,
}

impl TrafficSpec {
    /// Poisson arrivals and exponential sizes at constant rates.
    pub fn markovian(arrival_rates: Vec<Vec<f64>>, mu: Vec<f64>) -> Self {
        let arrival_scv = arrival_rates.iter().map(|r| vec![1.0; r.len()]).collect();
        let size_scv = vec![1.0; mu.len()];
        Self { arrival_rates, arrival_scv, mu, size_scv }
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self, users: usize, states: usize) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if self.mu.len() != users || self.size_scv.len() != users || self.arrival_rates.len() != users || self.arrival_scv.len() != users {
            return bad(format!("traffic must describe {users} users"));
        }
        for j in 0..users {
            if self.arrival_rates[j].len() != states || self.arrival_scv[j].len() != states {
                return bad(format!("user {j} must have one arrival rate and SCV per state ({states})"));
            }
            if self.arrival_rates[j].iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
                return bad(format!("user {j} has a negative or non-finite arrival rate"));
            }
            if self.arrival_scv[j].iter().chain([&self.size_scv[j]]).any(|&s| !(s > 0.0) || !s.is_finite()) {
                return bad(format!("user {j} has a non-positive SCV"));
            }
            if !(self.mu[j] > 0.0) || !self.mu[j].is_finite() {
                return bad(format!("user {j} has a non-positive service rate"));
            }
        }
        Ok(())
    }
}

/// Gamma variate with the given mean and SCV.
fn gamma(mean: f64, scv: f64) -> Gamma<f64> {
    Gamma::new(1.0 / scv, mean * scv).expect("validated parameters")
}

/// The rate rule used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    UtilityMax,
    #[serde(rename = "maxweight")]
    MaxWeight,
    StaticRho,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::UtilityMax => "utility-max",
            PolicyKind::MaxWeight => "maxweight",
            PolicyKind::StaticRho => "static-rho",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "utility-max" => Ok(PolicyKind::UtilityMax),
            "maxweight" => Ok(PolicyKind::MaxWeight),
            "static-rho" => Ok(PolicyKind::StaticRho),
            other => Err(format!("unknown policy '{other}' (expected utility-max, maxweight or static-rho)")),
        }
    }
}

/// Allocations keyed by `(state, Q)`. Policies are deterministic in their
/// inputs, so replicas of one policy on one region may share a cache.
pub type SharedCache = Arc<RwLock<HashMap<(usize, Vec<u32>), Vec<f64>>>>;

pub fn new_cache() -> SharedCache {
    Arc::new(RwLock::new(HashMap::new()))
}

/// A rate rule with a cache of allocations keyed by `(state, Q)`.
#[derive(Debug)]
pub struct PolicyHandle<'a> {
    kind: PolicyKind,
    allocator: Allocator<'a>,
    mu: Vec<f64>,
    rho: Vec<Vec<f64>>,
    cache: SharedCache,
}

impl<'a> PolicyHandle<'a> {
    pub fn new(kind: PolicyKind, region: &'a CapacityRegion, utility: &'a UtilityFamily, mu: &[f64]) -> Result<Self, SimError> {
        Self::with_cache(kind, region, utility, mu, new_cache())
    }

    /// Like [`PolicyHandle::new`] but reusing `cache`, which must only ever
    /// be shared between handles of the same kind, region, utility and `μ`.
    pub fn with_cache(kind: PolicyKind, region: &'a CapacityRegion, utility: &'a UtilityFamily, mu: &[f64], cache: SharedCache) -> Result<Self, SimError> {
        if mu.len() != region.users() || utility.users() != region.users() {
            return Err(SimError::Invalid("policy dimensions do not match the region".into()));
        }
        let rho = if kind == PolicyKind::StaticRho { capacity::balanced_points(region)? } else { Vec::new() };
        Ok(Self { kind, allocator: Allocator::new(region, utility), mu: mu.to_vec(), rho, cache })
    }

    /// Static rule with explicit per-state rates, served only to nonempty queues.
    pub fn fixed(region: &'a CapacityRegion, utility: &'a UtilityFamily, rates: Vec<Vec<f64>>) -> Result<Self, SimError> {
        if rates.len() != region.state_count() || rates.iter().any(|r| r.len() != region.users()) {
            return Err(SimError::Invalid("one rate vector per state is required".into()));
        }
        let mu = vec![1.0; region.users()];
        Ok(Self { kind: PolicyKind::StaticRho, allocator: Allocator::new(region, utility), mu, rho: rates, cache: new_cache() })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn region(&self) -> &CapacityRegion {
        self.allocator.region()
    }

    /// Rate vector for queue lengths `q` in state `i`.
    pub fn rate(&mut self, i: usize, q: &[u32]) -> Result<Vec<f64>, SimError> {
        if self.kind == PolicyKind::StaticRho {
            return Ok(q.iter().zip(&self.rho[i]).map(|(&n, &r)| if n > 0 { r } else { 0.0 }).collect());
        }
        let key = (i, q.to_vec());
        if let Some(c) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let qf: Vec<f64> = q.iter().map(|&n| n as f64).collect();
        let c = match self.kind {
            PolicyKind::UtilityMax => self.allocator.allocate(i, &qf)?.c,
            PolicyKind::MaxWeight => maxweight_with(&self.allocator, i, &qf, &self.mu)?,
            PolicyKind::StaticRho => unreachable!(),
        };
        self.cache.write().expect("cache lock").insert(key, c.clone());
        Ok(c)
    }
}

fn maxweight_with(alloc: &Allocator<'_>, i: usize, q: &[f64], mu: &[f64]) -> Result<Vec<f64>, SimError> {
    let w: Vec<f64> = q.iter().zip(mu).map(|(a, b)| a * b).collect();
    Ok(alloc.maximize_linear(i, &w)?)
}

/// `argmax Σ_j q_j μ_j c_j` over `R(i)` with `c_j = 0` where `q_j = 0`.
pub fn maxweight_rate(region: &CapacityRegion, i: usize, q: &[f64], mu: &[f64]) -> Result<Vec<f64>, SimError> {
    if mu.len() != region.users() {
        return Err(SimError::Invalid("μ must have one entry per user".into()));
    }
    let utility = UtilityFamily::linear_log(&vec![1.0; region.users()]);
    maxweight_with(&Allocator::new(region, &utility), i, q, mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Arrival,
    Departure,
    RegimeSwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// `None` for environment switches.
    pub user: Option<usize>,
    /// Environment state after the event.
    pub state: usize,
}

/// Run controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub horizon: f64,
    pub grid_step: f64,
    pub record_events: bool,
}

impl SimSettings {
    pub fn new(horizon: f64, grid_step: f64) -> Self {
        Self { horizon, grid_step, record_events: false }
    }
}

/// Runs the queues from empty over `[0, settings.horizon]`.
pub fn simulate(traffic: &TrafficSpec, policy: &mut PolicyHandle<'_>, env: &EnvPath, settings: SimSettings, seed: SeedStreams) -> Result<SystemTrajectory, SimError> {
    simulate_from(traffic, policy, env, settings, seed, None)
}

/// Grid-sampled paths of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTrajectory {
    pub users: usize,
    pub grid_step: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    /// `Q_j(t_k)` stored row-major by sample.
    queues: Vec<u32>,
    /// `T_j(t_k)` stored row-major by sample.
    served: Vec<f64>,
    pub workload: Vec<f64>,
    pub unused: Vec<f64>,
    pub events: Vec<Event>,
    pub arrivals: Vec<u64>,
    pub departures: Vec<u64>,
    /// Bits carried by the packets that departed.
    pub departed_bits: Vec<f64>,
    /// Bits already served of the packet in service at the horizon.
    pub partial_bits: Vec<f64>,
    /// Exact `∫₀ᵀ Q_j(t) dt`.
    pub queue_area: Vec<f64>,
    /// Largest facet value seen at any event epoch.
    pub max_violation: f64,
    pub env: EnvPath,
}

impl SystemTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn queue(&self, k: usize) -> &[u32] {
        &self.queues[k * self.users..(k + 1) * self.users]
    }

    pub fn served(&self, k: usize) -> &[f64] {
        &self.served[k * self.users..(k + 1) * self.users]
    }

    /// Total served bits at the horizon.
    pub fn final_served(&self) -> Vec<f64> {
        (0..self.users).map(|j| self.departed_bits[j] + self.partial_bits[j]).collect()
    }

    /// Columns `time, state, Q_1.., W, Y, T_1..`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,state");
        for j in 1..=self.users {
            let _ = write!(out, ",Q_{j}");
        }
        out.push_str(",W,Y");
        for j in 1..=self.users {
            let _ = write!(out, ",T_{j}");
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(out, "{},{}", self.times[k], self.states[k]);
            for q in self.queue(k) {
                let _ = write!(out, ",{q}");
            }
            let _ = write!(out, ",{},{}", self.workload[k], self.unused[k]);
            for t in self.served(k) {
                let _ = write!(out, ",{t}");
            }
            out.push('\n');
        }
        out
    }

    /// One JSON record per event.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("plain data"));
            out.push('\n');
        }
        out
    }
}

struct UserStreams {
    arrivals: ChaCha8Rng,
    sizes: ChaCha8Rng,
}

fn draw_interarrival(traffic: &TrafficSpec, rng: &mut ChaCha8Rng, j: usize, state: usize) -> f64 {
    let lambda = traffic.arrival_rates[j][state];
    if lambda == 0.0 {
        return f64::INFINITY;
    }
    gamma(1.0 / lambda, traffic.arrival_scv[j][state]).sample(rng)
}

fn draw_size(traffic: &TrafficSpec, rng: &mut ChaCha8Rng, j: usize) -> f64 {
    loop {
        let v = gamma(1.0 / traffic.mu[j], traffic.size_scv[j]).sample(rng);
        // zero-length packets would depart at their arrival epoch
        if v > 0.0 {
            return v;
        }
        let _: u32 = rng.random();
    }
}

/// Like [`simulate`], but starting with `initial[j]` packets in queue `j`
/// (lengths drawn from the packet-size distribution).
pub fn simulate_from(
    traffic: &TrafficSpec,
    policy: &mut PolicyHandle<'_>,
    env: &EnvPath,
    settings: SimSettings,
    seed: SeedStreams,
    initial: Option<&[u32]>,
) -> Result<SystemTrajectory, SimError> {
    let region = policy.region().clone();
    let users = region.users();
    traffic.validate(users, region.state_count())?;
    let SimSettings { horizon, grid_step, record_events } = settings;
    if !(grid_step > 0.0) || !grid_step.is_finite() {
        return Err(SimError::Invalid(format!("grid step {grid_step} must be positive")));
    }
    if !(horizon > 0.0) || horizon > env.horizon() * (1.0 + 1e-12) {
        return Err(SimError::Invalid(format!("horizon {horizon} must be positive and within the environment path ({})", env.horizon())));
    }
    if env.states().iter().any(|&s| s >= region.state_count()) {
        return Err(SimError::Invalid("environment path visits a state the region does not define".into()));
    }
    let cu: Vec<f64> = (0..region.state_count()).map(|i| capacity::sum_capacity(&region, i)).collect::<Result<_, _>>()?;

    let mut streams: Vec<UserStreams> =
        (0..users as u64).map(|j| UserStreams { arrivals: seed.rng(Purpose::Arrivals, j), sizes: seed.rng(Purpose::PacketSizes, j) }).collect();
    let jumps = env.jump_times();
    let mut interval = 0;
    let mut state = env.states()[0];
    let mut next_switch = jumps.get(1).copied().unwrap_or(f64::INFINITY);

    let mut queues: Vec<VecDeque<f64>> = vec![VecDeque::new(); users];
    let mut head_len = vec![0.0; users];
    let mut counts = vec![0u32; users];
    let mut next_arrival: Vec<f64> = (0..users).map(|j| draw_interarrival(traffic, &mut streams[j].arrivals, j, state)).collect();
    let mut served = vec![0.0; users];
    let mut cap_integral = 0.0;

    let samples = (horizon / grid_step).floor() as usize + 1;
    let mut traj = SystemTrajectory {
        users,
        grid_step,
        horizon,
        times: Vec::with_capacity(samples),
        states: Vec::with_capacity(samples),
        queues: Vec::with_capacity(samples * users),
        served: Vec::with_capacity(samples * users),
        workload: Vec::with_capacity(samples),
        unused: Vec::with_capacity(samples),
        events: Vec::new(),
        arrivals: vec![0; users],
        departures: vec![0; users],
        departed_bits: vec![0.0; users],
        partial_bits: vec![0.0; users],
        queue_area: vec![0.0; users],
        max_violation: f64::NEG_INFINITY,
        env: env.clone(),
    };

    if let Some(init) = initial {
        if init.len() != users {
            return Err(SimError::Invalid(format!("initial queue has {} entries, expected {users}", init.len())));
        }
        for j in 0..users {
            for _ in 0..init[j] {
                queues[j].push_back(draw_size(traffic, &mut streams[j].sizes, j));
            }
            counts[j] = init[j];
            if let Some(&h) = queues[j].front() {
                head_len[j] = h;
            }
        }
    }

    let mut t = 0.0;
    let mut next_grid = 0usize;
    let mut rates = checked_rate(policy, &region, state, &counts, t)?;
    traj.max_violation = region.state(state)?.max_violation(&rates);

    loop {
        let mut t_dep = f64::INFINITY;
        let mut dep_user = usize::MAX;
        for j in 0..users {
            if rates[j] > 0.0 {
                if let Some(&rem) = queues[j].front() {
                    let tc = t + rem / rates[j];
                    if tc < t_dep {
                        t_dep = tc;
                        dep_user = j;
                    }
                }
            }
        }
        let (arr_user, t_arr) = next_arrival.iter().enumerate().fold((usize::MAX, f64::INFINITY), |acc, (j, &a)| if a < acc.1 { (j, a) } else { acc });
        let t_next = t_dep.min(t_arr).min(next_switch).min(horizon);

        while next_grid < samples {
            let g = next_grid as f64 * grid_step;
            if g > t_next {
                break;
            }
            let dt = g - t;
            traj.times.push(g);
            traj.states.push(state);
            traj.queues.extend_from_slice(&counts);
            let mut total = 0.0;
            for j in 0..users {
                let s = served[j] + if counts[j] > 0 { rates[j] * dt } else { 0.0 };
                traj.served.push(s);
                total += s;
            }
            traj.workload.push(counts.iter().zip(&traffic.mu).map(|(&n, m)| n as f64 / m).sum());
            traj.unused.push(cap_integral + cu[state] * dt - total);
            next_grid += 1;
        }

        let dt = t_next - t;
        for j in 0..users {
            traj.queue_area[j] += counts[j] as f64 * dt;
            if counts[j] > 0 && rates[j] > 0.0 {
                served[j] += rates[j] * dt;
                if let Some(rem) = queues[j].front_mut() {
                    *rem -= rates[j] * dt;
                }
            }
        }
        cap_integral += cu[state] * dt;
        t = t_next;
        if t >= horizon {
            break;
        }

        let mut log = |kind, user, state| {
            if record_events {
                traj.events.push(Event { time: t, kind, user, state });
            }
        };
        if t == next_switch {
            interval += 1;
            state = env.states()[interval];
            next_switch = jumps.get(interval + 1).copied().unwrap_or(f64::INFINITY);
            for j in 0..users {
                next_arrival[j] = t + draw_interarrival(traffic, &mut streams[j].arrivals, j, state);
            }
            log(EventKind::RegimeSwitch, None, state);
        } else if t == t_dep {
            let j = dep_user;
            queues[j].pop_front();
            counts[j] -= 1;
            traj.departures[j] += 1;
            traj.departed_bits[j] += head_len[j];
            if let Some(&next) = queues[j].front() {
                head_len[j] = next;
            }
            log(EventKind::Departure, Some(j), state);
        } else {
            let j = arr_user;
            let size = draw_size(traffic, &mut streams[j].sizes, j);
            if queues[j].is_empty() {
                head_len[j] = size;
            }
            queues[j].push_back(size);
            counts[j] += 1;
            traj.arrivals[j] += 1;
            next_arrival[j] = t + draw_interarrival(traffic, &mut streams[j].arrivals, j, state);
            log(EventKind::Arrival, Some(j), state);
        }
        rates = checked_rate(policy, &region, state, &counts, t)?;
        traj.max_violation = traj.max_violation.max(region.state(state)?.max_violation(&rates));
    }
    for j in 0..users {
        if let Some(&rem) = queues[j].front() {
            traj.partial_bits[j] = head_len[j] - rem;
        }
    }
    Ok(traj)
}

fn checked_rate(policy: &mut PolicyHandle<'_>, region: &CapacityRegion, state: usize, counts: &[u32], time: f64) -> Result<Vec<f64>, SimError> {
    let rates = policy.rate(state, counts)?;
    let violation = region.state(state)?.max_violation(&rates);
    let idle_violation = rates.iter().zip(counts).any(|(&c, &n)| n == 0 && c != 0.0);
    if violation > RATE_FEASIBILITY_TOL || idle_violation || rates.iter().any(|&c| !(c >= 0.0)) {
        return Err(SimError::InfeasibleRate { time, state, rates, violation });
    }
    Ok(rates)
}

/// `Y(t_k) = ∫₀^{t_k} C_U(α(s)) ds − Σ_j T_j(t_k)` on the trajectory grid,
/// where `C_U(i) = Σ_j ρ_j(i)`.
pub fn unused_capacity(trajectory: &SystemTrajectory, region: &CapacityRegion) -> Result<Vec<f64>, SimError> {
    let cu: Vec<f64> = (0..region.state_count()).map(|i| capacity::sum_capacity(region, i)).collect::<Result<_, _>>()?;
    let intervals: Vec<(f64, f64, usize)> = trajectory.env.intervals().collect();
    let mut out = Vec::with_capacity(trajectory.len());
    let mut n = 0;
    let mut done = 0.0;
    for k in 0..trajectory.len() {
        let t = trajectory.times[k];
        while n < intervals.len() && intervals[n].1 <= t {
            done += (intervals[n].1 - intervals[n].0) * cu[intervals[n].2];
            n += 1;
        }
        let partial = if n < intervals.len() { (t - intervals[n].0).max(0.0) * cu[intervals[n].2] } else { 0.0 };
        out.push(done + partial - trajectory.served(k).iter().sum::<f64>());
    }
    Ok(out)
}
