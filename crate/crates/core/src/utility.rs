//! Separable utilities `U_j(q_j, c_j) = Φ_j(q_j)·Ψ(c_j)`.
//!
//! `Φ_j` must vanish at 0, be strictly increasing and unbounded; `Ψ` must be
//! strictly increasing and strictly concave. The built-in families satisfy
//! this by construction; [`UtilityFamily::validate`] spot-checks custom ones.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum UtilityError {
    #[error("queue weight {user}: {reason}")]
    BadWeight { user: usize, reason: String },
    #[error("rate utility: {0}")]
    BadRateUtility(String),
    #[error("utility family has no users")]
    Empty,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied `Φ` with its derivative.
#[derive(Clone)]
pub struct CustomWeight {
    pub name: String,
    pub value: ScalarFn,
    pub derivative: ScalarFn,
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeight").field("name", &self.name).finish()
    }
}

/// Queue-side factor `Φ_j`.
#[derive(Debug, Clone)]
pub enum QueueWeight {
    /// `Φ(q) = w·q`
    Linear { weight: f64 },
    /// `Φ(q) = w·q^β`
    Power { weight: f64, beta: f64 },
    Custom(CustomWeight),
}

impl QueueWeight {
    pub fn value(&self, q: f64) -> f64 {
        match self {
            QueueWeight::Linear { weight } => weight * q,
            QueueWeight::Power { weight, beta } => weight * q.powf(*beta),
            QueueWeight::Custom(c) => (c.value)(q),
        }
    }

    pub fn derivative(&self, q: f64) -> f64 {
        match self {
            QueueWeight::Linear { weight } => *weight,
            QueueWeight::Power { weight, beta } => weight * beta * q.powf(beta - 1.0),
            QueueWeight::Custom(c) => (c.derivative)(q),
        }
    }

    /// `∫₀^q Φ(u) du`; adaptive Simpson (tolerance 1e−10) for custom weights.
    pub fn integral(&self, q: f64) -> f64 {
        match self {
            QueueWeight::Linear { weight } => 0.5 * weight * q * q,
            QueueWeight::Power { weight, beta } => weight * q.powf(beta + 1.0) / (beta + 1.0),
            QueueWeight::Custom(c) => adaptive_simpson(&*c.value, 0.0, q, 1e-10),
        }
    }

    /// `Φ^{-1}(y)` for `y ≥ 0`; monotone bisection to 1e−12 for custom weights.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self {
            QueueWeight::Linear { weight } => y / weight,
            QueueWeight::Power { weight, beta } => (y / weight).powf(1.0 / beta),
            QueueWeight::Custom(c) => {
                let f = &c.value;
                let mut hi = 1.0;
                while f(hi) < y {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                while hi - lo > 1e-12 * hi.max(1.0) {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Rate-side factor `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateUtility {
    /// `Ψ(c) = log(1 + c)`
    Log1p,
    /// `Ψ(c) = c^{1−α} / (1 − α)`, `α ∈ (0, 1)`
    Power { alpha: f64 },
}

impl RateUtility {
    pub fn value(&self, c: f64) -> f64 {
        match *self {
            RateUtility::Log1p => c.ln_1p(),
            RateUtility::Power { alpha } => c.powf(1.0 - alpha) / (1.0 - alpha),
        }
    }

    pub fn derivative(&self, c: f64) -> f64 {
        match *self {
            RateUtility::Log1p => 1.0 / (1.0 + c),
            RateUtility::Power { alpha } => c.powf(-alpha),
        }
    }

    pub fn second_derivative(&self, c: f64) -> f64 {
        match *self {
            RateUtility::Log1p => -1.0 / ((1.0 + c) * (1.0 + c)),
            RateUtility::Power { alpha } => -alpha * c.powf(-alpha - 1.0),
        }
    }
}

/// The per-user utilities of one scheduling policy.
#[derive(Debug, Clone)]
pub struct UtilityFamily {
    pub weights: Vec<QueueWeight>,
    pub rate: RateUtility,
}

impl UtilityFamily {
    /// `Φ_j(q) = w_j q`, `Ψ(c) = log(1 + c)`.
    pub fn linear_log(weights: &[f64]) -> Self {
        Self { weights: weights.iter().map(|&w| QueueWeight::Linear { weight: w }).collect(), rate: RateUtility::Log1p }
    }

    /// `Φ_j(q) = q^β`, `Ψ(c) = c^{1−α} / (1 − α)`.
    pub fn power(users: usize, beta: f64, alpha: f64) -> Self {
        Self {
            weights: vec![QueueWeight::Power { weight: 1.0, beta }; users],
            rate: RateUtility::Power { alpha },
        }
    }

    pub fn users(&self) -> usize {
        self.weights.len()
    }

    /// `U_j(q_j, c_j)`.
    pub fn utility(&self, j: usize, q: f64, c: f64) -> f64 {
        self.weights[j].value(q) * self.rate.value(c)
    }

    /// `∂U_j/∂c_j`.
    pub fn marginal(&self, j: usize, q: f64, c: f64) -> f64 {
        self.weights[j].value(q) * self.rate.derivative(c)
    }

    pub fn total(&self, q: &[f64], c: &[f64]) -> f64 {
        (0..q.len()).map(|j| self.utility(j, q[j], c[j])).sum()
    }

    /// Spot checks of the structural conditions on a grid.
    pub fn validate(&self) -> Result<(), UtilityError> {
        if self.weights.is_empty() {
            return Err(UtilityError::Empty);
        }
        for (j, w) in self.weights.iter().enumerate() {
            let bad = |reason: &str| UtilityError::BadWeight { user: j, reason: reason.into() };
            match w {
                QueueWeight::Linear { weight } if !(*weight > 0.0) => return Err(bad("weight must be positive")),
                QueueWeight::Power { weight, beta } if !(*weight > 0.0 && *beta > 0.0) => {
                    return Err(bad("weight and exponent must be positive"))
                }
                _ => {}
            }
            if w.value(0.0).abs() > 1e-15 {
                return Err(bad("Φ(0) must be 0"));
            }
            let mut prev = 0.0;
            for k in 1..=64 {
                let q = 0.01 * 1.25f64.powi(k);
                let v = w.value(q);
                if !(v > prev) {
                    return Err(bad("Φ must be strictly increasing"));
                }
                prev = v;
            }
        }
        match self.rate {
            RateUtility::Power { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                return Err(UtilityError::BadRateUtility(format!("alpha {alpha} outside (0, 1)")))
            }
            _ => {}
        }
        Ok(())
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}
