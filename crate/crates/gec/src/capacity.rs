//! Channel parameters: symmetric capacities of order alpha, error
//! probability under maximum-likelihood decoding, the average Bhattacharyya
//! distance, and the Gallager exponent function.
//!
//! Everything is in nats. For a generalized erasure channel the capacity has
//! a closed form over the eps vector,
//!
//! ```text
//!   I_a(V) = a/(a-1) * ln( sum_d eps_d * d^((a-1)/a) )
//! ```
//!
//! with limits `min{ln d : eps_d > 0}` at a = 0, `sum_d eps_d ln d` at a = 1,
//! and `ln(sum_d eps_d d)` at a = infinity. The generic matrix formulas below
//! evaluate the same quantities on any explicit channel; agreement between
//! the two routes is one of the crate's keystone checks.

use std::fmt;
use std::str::FromStr;

use crate::channel::{ExplicitDmc, Gec};
use crate::divisors::DivisorSet;
use crate::error::{Error, Result};

/// Entries smaller than this count as zero when the order-0 capacity counts
/// the support of an explicit matrix column.
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

/// Orders within this distance of 1 are evaluated with the order-1 limit
/// formula; the a/(a-1) prefactor amplifies rounding catastrophically near 1.
pub const ALPHA_ONE_WINDOW: f64 = 1e-9;

/// An order parameter in `[0, infinity]`. The values 0, 1, and infinity
/// select the corresponding limit formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha(f64);

impl Alpha {
    pub const ZERO: Alpha = Alpha(0.0);
    pub const ONE: Alpha = Alpha(1.0);
    pub const HALF: Alpha = Alpha(0.5);
    pub const INFINITY: Alpha = Alpha(f64::INFINITY);

    /// Accepts any nonnegative real or `f64::INFINITY`.
    pub fn new(value: f64) -> Result<Alpha> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::InvalidAlpha(value));
        }
        Ok(Alpha(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn is_one(self) -> bool {
        (self.0 - 1.0).abs() < ALPHA_ONE_WINDOW
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// The corresponding Gallager argument `rho = (1 - a)/a`.
    pub fn rho(self) -> f64 {
        if self.is_infinite() {
            -1.0
        } else {
            (1.0 - self.0) / self.0
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Alpha> {
        let t = s.trim();
        if matches!(t, "inf" | "Inf" | "INF" | "infinity" | "Infinity" | "∞") {
            return Ok(Alpha::INFINITY);
        }
        let value: f64 = t.parse().map_err(|_| Error::AlphaParse(s.to_string()))?;
        Alpha::new(value)
    }
}

/// The standard evaluation grid `{0, 1/4, 1/2, 3/4, 1, 3/2, 2, 4, inf}`.
pub const ALPHA_GRID: [Alpha; 9] = [
    Alpha(0.0),
    Alpha(0.25),
    Alpha(0.5),
    Alpha(0.75),
    Alpha(1.0),
    Alpha(1.5),
    Alpha(2.0),
    Alpha(4.0),
    Alpha(f64::INFINITY),
];

/// The grid used by the certification oracle: `{0, 1/4, 1/2, 1, 2, inf}`.
pub const CERTIFY_ALPHA_GRID: [Alpha; 6] = [
    Alpha(0.0),
    Alpha(0.25),
    Alpha(0.5),
    Alpha(1.0),
    Alpha(2.0),
    Alpha(f64::INFINITY),
];

/// Evaluates the closed-form capacity of order alpha for eps vectors over a
/// fixed divisor lattice. Per-divisor powers are precomputed once, so leaf
/// evaluation inside tree sweeps is a dot product plus one log.
#[derive(Debug, Clone)]
pub struct AlphaEvaluator<'a> {
    lattice: &'a DivisorSet,
    kind: EvalKind,
}

#[derive(Debug, Clone)]
enum EvalKind {
    Zero,
    One,
    Infinity,
    Finite { prefactor: f64, pow: Vec<f64> },
}

impl<'a> AlphaEvaluator<'a> {
    pub fn new(lattice: &'a DivisorSet, alpha: Alpha) -> Self {
        let kind = if alpha.is_zero() {
            EvalKind::Zero
        } else if alpha.is_one() {
            EvalKind::One
        } else if alpha.is_infinite() {
            EvalKind::Infinity
        } else {
            let a = alpha.value();
            let exponent = (a - 1.0) / a;
            let pow = lattice
                .ln_divisors()
                .iter()
                .map(|&ln_d| (exponent * ln_d).exp())
                .collect();
            EvalKind::Finite {
                prefactor: a / (a - 1.0),
                pow,
            }
        };
        AlphaEvaluator { lattice, kind }
    }

    /// Capacity in nats of the channel with erasure vector `eps`, which must
    /// be aligned with the lattice's divisor order.
    pub fn eval(&self, eps: &[f64]) -> f64 {
        debug_assert_eq!(eps.len(), self.lattice.len());
        match &self.kind {
            EvalKind::Zero => {
                let lns = self.lattice.ln_divisors();
                eps.iter()
                    .enumerate()
                    .find(|(_, &e)| e > 0.0)
                    .map(|(i, _)| lns[i])
                    .unwrap_or(0.0)
            }
            EvalKind::One => {
                let lns = self.lattice.ln_divisors();
                eps.iter().zip(lns).map(|(&e, &ln_d)| e * ln_d).sum()
            }
            EvalKind::Infinity => {
                let total: f64 = eps
                    .iter()
                    .zip(self.lattice.divisors())
                    .map(|(&e, &d)| e * d as f64)
                    .sum();
                total.ln()
            }
            EvalKind::Finite { prefactor, pow } => {
                let total: f64 = eps.iter().zip(pow).map(|(&e, &p)| e * p).sum();
                prefactor * total.ln()
            }
        }
    }
}

impl Gec {
    /// Symmetric capacity of order `alpha` in nats, via the closed form over
    /// the eps vector. Always in `[0, ln q]`.
    pub fn i_alpha(&self, alpha: Alpha) -> f64 {
        AlphaEvaluator::new(self.lattice(), alpha).eval(self.eps())
    }
}

impl ExplicitDmc {
    /// Symmetric capacity of order `alpha` in nats, computed directly on the
    /// transition matrix under the uniform input distribution.
    pub fn i_alpha(&self, alpha: Alpha) -> f64 {
        let q = self.q() as f64;
        let inv_q = 1.0 / q;
        let cols = self.num_outputs();
        if alpha.is_zero() {
            let mut best = f64::INFINITY;
            for y in 0..cols {
                let support = (0..self.q())
                    .filter(|&x| self.prob(x, y) > SUPPORT_THRESHOLD)
                    .count();
                if support > 0 {
                    best = best.min((q / support as f64).ln());
                }
            }
            return if best.is_finite() { best } else { 0.0 };
        }
        if alpha.is_one() {
            let mut total = 0.0;
            for y in 0..cols {
                let p_y: f64 = (0..self.q()).map(|x| inv_q * self.prob(x, y)).sum();
                if p_y <= 0.0 {
                    continue;
                }
                for x in 0..self.q() {
                    let w = self.prob(x, y);
                    if w > 0.0 {
                        total += inv_q * w * (w / p_y).ln();
                    }
                }
            }
            return total;
        }
        if alpha.is_infinite() {
            let mut total = 0.0;
            for y in 0..cols {
                total += (0..self.q()).map(|x| self.prob(x, y)).fold(0.0, f64::max);
            }
            return total.ln();
        }
        let a = alpha.value();
        let mut total = 0.0;
        for y in 0..cols {
            let inner: f64 = (0..self.q()).map(|x| inv_q * self.prob(x, y).powf(a)).sum();
            if inner > 0.0 {
                total += inner.powf(1.0 / a);
            }
        }
        a / (a - 1.0) * total.ln()
    }

    /// Average error probability of a maximum-likelihood decoder under
    /// uniform inputs, in `[0, (q-1)/q]`.
    pub fn error_probability(&self) -> f64 {
        let inv_q = 1.0 / self.q() as f64;
        let mut total = 0.0;
        for y in 0..self.num_outputs() {
            total += (0..self.q()).map(|x| self.prob(x, y)).fold(0.0, f64::max);
        }
        1.0 - inv_q * total
    }

    /// Average Bhattacharyya distance over distinct input pairs, in `[0, 1]`.
    /// Needs at least two inputs.
    pub fn bhattacharyya(&self) -> Result<f64> {
        let q = self.q();
        if q < 2 {
            return Err(Error::AlphabetTooSmall(q));
        }
        let mut total = 0.0;
        for x in 0..q {
            for xp in 0..q {
                if x == xp {
                    continue;
                }
                for y in 0..self.num_outputs() {
                    total += (self.prob(x, y) * self.prob(xp, y)).sqrt();
                }
            }
        }
        Ok(total / (q as f64 * (q as f64 - 1.0)))
    }

    /// The Gallager exponent function at `rho > -1` under uniform inputs.
    pub fn gallager_e0(&self, rho: f64) -> Result<f64> {
        if rho.is_nan() || rho <= -1.0 {
            return Err(Error::RhoOutOfRange(rho));
        }
        let inv_q = 1.0 / self.q() as f64;
        let exponent = 1.0 / (1.0 + rho);
        let mut total = 0.0;
        for y in 0..self.num_outputs() {
            let inner: f64 = (0..self.q())
                .map(|x| inv_q * self.prob(x, y).powf(exponent))
                .sum();
            if inner > 0.0 {
                total += inner.powf(1.0 + rho);
            }
        }
        Ok(-total.ln())
    }
}
