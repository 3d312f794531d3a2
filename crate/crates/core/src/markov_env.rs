//! The random environment: a finite-state continuous-time Markov chain given
//! by per-state holding rates and the embedded jump chain.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{Purpose, SeedStreams};

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("dimension mismatch: {rates} holding rates but embedded matrix row {row} has {len} entries ({rows} rows)")]
    DimensionMismatch { rates: usize, rows: usize, row: usize, len: usize },
    #[error("environment needs at least one state")]
    Empty,
    #[error("nonpositive holding rate {rate} at state {index}")]
    NonpositiveRate { index: usize, rate: f64 },
    #[error("nonzero diagonal {value} at embedded matrix row {index}")]
    NonzeroDiagonal { index: usize, value: f64 },
    #[error("negative or non-finite transition probability {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("embedded matrix row {index} sums to {sum}, not 1")]
    NonStochasticRow { index: usize, sum: f64 },
    #[error("initial state {state} outside 0..{count}")]
    BadInitialState { state: usize, count: usize },
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("scale factor must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("chain is reducible: stationary system is singular or has a zero component")]
    Reducible,
}

/// Generator of the environment chain.
///
/// A row of zeros in the embedded matrix marks an absorbing state; its
/// generator row is zero. Every other row must be a probability vector with a
/// zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvGenerator {
    holding_rates: Vec<f64>,
    embedded: Vec<Vec<f64>>,
    generator: Vec<Vec<f64>>,
}

impl EnvGenerator {
    pub fn state_count(&self) -> usize {
        self.holding_rates.len()
    }

    pub fn holding_rates(&self) -> &[f64] {
        &self.holding_rates
    }

    pub fn embedded(&self) -> &[Vec<f64>] {
        &self.embedded
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    fn is_absorbing(&self, i: usize) -> bool {
        self.embedded[i].iter().all(|&p| p == 0.0)
    }

    /// Mean holding time averaged uniformly over states.
    pub fn mean_holding_time(&self) -> f64 {
        self.holding_rates.iter().map(|g| 1.0 / g).sum::<f64>() / self.state_count() as f64
    }
}

/// Validates `(γ, Q)` and fills `G` with `g_ii = -γ(i)`, `g_il = γ(i) q_il`.
pub fn build_generator(holding_rates: &[f64], embedded: &[Vec<f64>]) -> Result<EnvGenerator, EnvError> {
    let k = holding_rates.len();
    if k == 0 {
        return Err(EnvError::Empty);
    }
    if embedded.len() != k {
        return Err(EnvError::DimensionMismatch { rates: k, rows: embedded.len(), row: embedded.len().min(k), len: 0 });
    }
    for (i, row) in embedded.iter().enumerate() {
        if row.len() != k {
            return Err(EnvError::DimensionMismatch { rates: k, rows: k, row: i, len: row.len() });
        }
    }
    for (i, &g) in holding_rates.iter().enumerate() {
        if !(g > 0.0) || !g.is_finite() {
            return Err(EnvError::NonpositiveRate { index: i, rate: g });
        }
    }
    for (i, row) in embedded.iter().enumerate() {
        if row[i] != 0.0 {
            return Err(EnvError::NonzeroDiagonal { index: i, value: row[i] });
        }
        for (l, &p) in row.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(EnvError::NegativeEntry { row: i, col: l, value: p });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum != 0.0 && (sum - 1.0).abs() > ROW_TOL {
            return Err(EnvError::NonStochasticRow { index: i, sum });
        }
    }
    let generator = (0..k)
        .map(|i| {
            let absorbing = embedded[i].iter().all(|&p| p == 0.0);
            (0..k)
                .map(|l| {
                    if absorbing {
                        0.0
                    } else if i == l {
                        -holding_rates[i]
                    } else {
                        holding_rates[i] * embedded[i][l]
                    }
                })
                .collect()
        })
        .collect();
    Ok(EnvGenerator { holding_rates: holding_rates.to_vec(), embedded: embedded.to_vec(), generator })
}

/// Holding rates divided by `r²`; the jump chain is unchanged.
pub fn scale_holding(gen: &EnvGenerator, r: f64) -> Result<EnvGenerator, EnvError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(EnvError::BadScale(r));
    }
    let rates: Vec<f64> = gen.holding_rates.iter().map(|g| g / (r * r)).collect();
    build_generator(&rates, &gen.embedded)
}

/// Solves `πG = 0`, `Σπ = 1` for an irreducible chain.
pub fn stationary_distribution(gen: &EnvGenerator) -> Result<Vec<f64>, EnvError> {
    let k = gen.state_count();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    // Rows of the system are columns of G; the last equation is replaced by Σπ = 1.
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for l in 0..k {
            a[(l, i)] = gen.generator[i][l];
        }
    }
    for i in 0..k {
        a[(k - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(EnvError::Reducible)?;
    if pi.iter().any(|&p| !(p > 1e-14) || !p.is_finite()) {
        return Err(EnvError::Reducible);
    }
    let pi: Vec<f64> = pi.iter().copied().collect();
    let residual = (0..k)
        .map(|l| (0..k).map(|i| pi[i] * gen.generator[i][l]).sum::<f64>().abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 {
        return Err(EnvError::Reducible);
    }
    Ok(pi)
}

/// Piecewise-constant, right-continuous environment path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvPath {
    /// `τ₀ = 0 < τ₁ < …`, each no later than the horizon.
    jump_times: Vec<f64>,
    /// State entered at the matching jump time.
    states: Vec<usize>,
    horizon: f64,
}

impl EnvPath {
    /// A path that stays in `state` for the whole horizon.
    pub fn constant(state: usize, horizon: f64) -> Self {
        Self { jump_times: vec![0.0], states: vec![state], horizon }
    }

    /// Builds a path from explicit jump epochs. Consecutive duplicate states are merged.
    pub fn from_jumps(jump_times: Vec<f64>, states: Vec<usize>, horizon: f64) -> Self {
        assert_eq!(jump_times.len(), states.len());
        assert!(!jump_times.is_empty() && jump_times[0] == 0.0);
        let mut times = Vec::with_capacity(jump_times.len());
        let mut st: Vec<usize> = Vec::with_capacity(states.len());
        for (t, s) in jump_times.into_iter().zip(states) {
            if t > horizon {
                break;
            }
            if st.last() == Some(&s) {
                continue;
            }
            if let Some(&last) = times.last() {
                assert!(t > last, "jump times must increase");
            }
            times.push(t);
            st.push(s);
        }
        Self { jump_times: times, states: st, horizon }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of jumps after time 0.
    pub fn jump_count(&self) -> usize {
        self.jump_times.len() - 1
    }

    /// Index of the holding interval containing `t` (right-continuous).
    pub fn interval_at(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn state_at(&self, t: f64) -> usize {
        self.states[self.interval_at(t)]
    }

    /// Holding intervals `(start, end, state)` clipped to the horizon.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..self.states.len()).map(move |n| {
            let end = self.jump_times.get(n + 1).copied().unwrap_or(self.horizon);
            (self.jump_times[n], end, self.states[n])
        })
    }

    /// Time spent in each state on `[0, horizon]`.
    pub fn occupation(&self, state_count: usize) -> Vec<f64> {
        let mut occ = vec![0.0; state_count];
        for (a, b, s) in self.intervals() {
            occ[s] += b - a;
        }
        occ
    }

    /// `∫₀ᵗ f(α(s)) ds`, exact for the piecewise-constant path.
    pub fn integrate<F: Fn(usize) -> f64>(&self, t: f64, f: F) -> f64 {
        let mut total = 0.0;
        for (a, b, s) in self.intervals() {
            if a >= t {
                break;
            }
            total += (b.min(t) - a) * f(s);
        }
        total
    }

    /// The path `t ↦ α(factor · t)` on `[0, horizon / factor]`.
    pub fn time_compressed(&self, factor: f64) -> EnvPath {
        EnvPath {
            jump_times: self.jump_times.iter().map(|t| t / factor).collect(),
            states: self.states.clone(),
            horizon: self.horizon / factor,
        }
    }
}

/// Samples a path with exponential holding times and jump-chain transitions.
/// Deterministic in `(gen, horizon, initial_state, seed)`.
pub fn sample_path(gen: &EnvGenerator, horizon: f64, initial_state: usize, seed: SeedStreams) -> Result<EnvPath, EnvError> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(EnvError::BadHorizon(horizon));
    }
    let k = gen.state_count();
    if initial_state >= k {
        return Err(EnvError::BadInitialState { state: initial_state, count: k });
    }
    let mut rng = seed.rng(Purpose::Environment, 0);
    let mut jump_times = vec![0.0];
    let mut states = vec![initial_state];
    let mut t = 0.0;
    let mut s = initial_state;
    loop {
        if gen.is_absorbing(s) {
            break;
        }
        let hold = Exp::new(gen.holding_rates[s]).expect("validated rate").sample(&mut rng);
        t += hold;
        if t > horizon {
            break;
        }
        let u: f64 = rng.random();
        let row = &gen.embedded[s];
        let mut acc = 0.0;
        let mut next = s;
        for (l, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                next = l;
                if u < acc {
                    break;
                }
            }
        }
        s = next;
        jump_times.push(t);
        states.push(s);
    }
    Ok(EnvPath { jump_times, states, horizon })
}
