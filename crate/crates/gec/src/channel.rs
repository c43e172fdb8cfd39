//! The generalized erasure channel and its explicit-matrix form.
//!
//! A [`Gec`] over input alphabet size `q` emits, on input `x`, the residue
//! class of `x` modulo `d` with probability `eps[d]`, for each divisor `d` of
//! `q`. Receiving the class mod `q` is noiseless reception; the class mod 1
//! is a total erasure. For `q = 2` this is exactly the binary erasure
//! channel, and for prime `q` the conventional q-ary erasure channel.
//!
//! [`ExplicitDmc`] is the raw row-stochastic matrix view used by the generic
//! capacity formulas and by the certification oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divisors::DivisorSet;
use crate::error::{Error, Result};

/// Input tolerance for the sum of a probability vector.
pub const EPS_SUM_TOLERANCE: f64 = 1e-9;

/// A generalized erasure channel: a divisor lattice plus one erasure
/// probability per divisor, aligned index-for-index with
/// `lattice.divisors()`.
///
/// Immutable after construction. The lattice is shared behind an `Arc`, so
/// transform outputs reuse the same pairing tables.
///
/// # Example
///
/// ```
/// use gec::{Alpha, Gec};
///
/// let v = Gec::new(6, [(1, 0.1), (2, 0.2), (3, 0.3), (6, 0.4)])?;
/// let (worse, better) = (v.polar_minus(), v.polar_plus());
/// // the Shannon capacity is conserved by the transform pair
/// let total = worse.i_alpha(Alpha::ONE) + better.i_alpha(Alpha::ONE);
/// assert!((total - 2.0 * v.i_alpha(Alpha::ONE)).abs() < 1e-12);
/// # Ok::<(), gec::Error>(())
/// ```
#[derive(Debug, Clone)]
pub struct Gec {
    lattice: Arc<DivisorSet>,
    eps: Vec<f64>,
}

impl Gec {
    /// Builds a channel from `(divisor, probability)` entries. The keys must
    /// be exactly the divisors of `q` and the values must be nonnegative and
    /// sum to 1 within [`EPS_SUM_TOLERANCE`]; residual drift is renormalized
    /// away so the stored vector sums to 1 exactly.
    pub fn new(q: u64, eps_by_divisor: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let lattice = Arc::new(DivisorSet::new(q)?);
        let mut eps = vec![f64::NAN; lattice.len()];
        for (d, value) in eps_by_divisor {
            let idx = lattice
                .divisor_index(d)
                .ok_or(Error::NotADivisor { value: d, q })?;
            if !eps[idx].is_nan() {
                return Err(Error::DuplicateDivisor(d));
            }
            eps[idx] = value;
        }
        if let Some(pos) = eps.iter().position(|e| e.is_nan()) {
            return Err(Error::MissingDivisor(lattice.divisors()[pos]));
        }
        Self::from_eps(lattice, eps)
    }

    /// Builds a channel from an eps vector already aligned with the lattice's
    /// ascending divisor order.
    pub fn from_eps(lattice: Arc<DivisorSet>, mut eps: Vec<f64>) -> Result<Self> {
        assert_eq!(eps.len(), lattice.len(), "eps not aligned with lattice");
        for (i, &e) in eps.iter().enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::BadProbability {
                    divisor: lattice.divisors()[i],
                    value: e,
                });
            }
        }
        let sum: f64 = eps.iter().sum();
        if (sum - 1.0).abs() > EPS_SUM_TOLERANCE {
            return Err(Error::ProbabilitySum(sum));
        }
        normalize_exact(&mut eps);
        Ok(Gec { lattice, eps })
    }

    /// Skips validation; used by the transform kernels whose outputs are
    /// probability vectors by construction. A single step keeps the sum
    /// within a few ulps, but iterated steps compound the drift roughly
    /// geometrically, so the tripwire here is deliberately loose.
    pub(crate) fn from_raw_parts(lattice: Arc<DivisorSet>, eps: Vec<f64>) -> Self {
        debug_assert_eq!(eps.len(), lattice.len());
        debug_assert!(
            (eps.iter().sum::<f64>() - 1.0).abs() < 1e-3,
            "transform output drifted off the simplex"
        );
        Gec { lattice, eps }
    }

    /// The binary erasure channel with erasure probability `erasure`:
    /// `q = 2`, `eps = (erasure, 1 - erasure)`.
    pub fn from_bec(erasure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&erasure) || erasure.is_nan() {
            return Err(Error::ErasureOutOfRange(erasure));
        }
        let lattice = Arc::new(DivisorSet::new(2)?);
        Ok(Gec {
            lattice,
            eps: vec![erasure, 1.0 - erasure],
        })
    }

    /// The plain q-ary erasure channel: total erasure with probability
    /// `erasure`, perfect reception otherwise. For prime `q` these are the
    /// only two divisors.
    pub fn erasure(q: u64, erasure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&erasure) || erasure.is_nan() {
            return Err(Error::ErasureOutOfRange(erasure));
        }
        let lattice = Arc::new(DivisorSet::new(q)?);
        let mut eps = vec![0.0; lattice.len()];
        eps[0] = erasure;
        let last = lattice.len() - 1;
        eps[last] = 1.0 - erasure;
        Ok(Gec { lattice, eps })
    }

    /// Samples eps uniformly from the probability simplex over the divisors
    /// of `q` (normalized i.i.d. exponentials).
    pub fn random(q: u64, rng: &mut impl Rng) -> Result<Self> {
        let lattice = Arc::new(DivisorSet::new(q)?);
        let mut eps: Vec<f64> = (0..lattice.len())
            .map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln())
            .collect();
        normalize_exact(&mut eps);
        Ok(Gec { lattice, eps })
    }

    pub fn q(&self) -> u64 {
        self.lattice.q()
    }

    pub fn lattice(&self) -> &Arc<DivisorSet> {
        &self.lattice
    }

    /// Erasure probabilities aligned with `lattice().divisors()`.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    /// Probability of receiving the residue class modulo `d`.
    pub fn eps_for(&self, d: u64) -> Option<f64> {
        self.lattice.divisor_index(d).map(|i| self.eps[i])
    }

    /// The explicit transition matrix. One output `(d, r)` per residue class
    /// `r` modulo each divisor `d`, including classes of divisors with zero
    /// probability, so the alphabet shape does not depend on eps.
    pub fn to_dmc(&self) -> ExplicitDmc {
        self.dmc_impl(false)
    }

    /// Like [`to_dmc`](Self::to_dmc) but dropping the output blocks of
    /// divisors with `eps[d] = 0`.
    pub fn to_dmc_support(&self) -> ExplicitDmc {
        self.dmc_impl(true)
    }

    fn dmc_impl(&self, drop_zero: bool) -> ExplicitDmc {
        let q = self.q();
        let mut outputs = Vec::new();
        let mut kept = Vec::new();
        for (i, &d) in self.lattice.divisors().iter().enumerate() {
            if drop_zero && self.eps[i] == 0.0 {
                continue;
            }
            kept.push(i);
            for r in 0..d {
                outputs.push(Label::Residue {
                    modulus: d,
                    residue: r,
                });
            }
        }
        let cols = outputs.len();
        let mut w = vec![0.0; q as usize * cols];
        for x in 0..q {
            let mut col = 0;
            for &i in &kept {
                let d = self.lattice.divisors()[i];
                for r in 0..d {
                    if x % d == r {
                        w[x as usize * cols + col] = self.eps[i];
                    }
                    col += 1;
                }
            }
        }
        ExplicitDmc { q, outputs, w }
    }

    /// The d-ary input channel obtained by merging inputs that share a
    /// residue class modulo `d`: row `x` is the average of the rows of the
    /// full channel over `{x' : x' = x (mod d)}`.
    pub fn degenerate(&self, d: u64) -> Result<ExplicitDmc> {
        let q = self.q();
        if self.lattice.divisor_index(d).is_none() {
            return Err(Error::NotADivisor { value: d, q });
        }
        let full = self.to_dmc();
        let cols = full.outputs.len();
        let mut w = vec![0.0; d as usize * cols];
        let scale = d as f64 / q as f64;
        for x in 0..d {
            for y in 0..cols {
                let mut acc = 0.0;
                let mut xp = x;
                while xp < q {
                    acc += full.w[xp as usize * cols + y];
                    xp += d;
                }
                w[x as usize * cols + y] = scale * acc;
            }
        }
        Ok(ExplicitDmc {
            q: d,
            outputs: full.outputs,
            w,
        })
    }

    /// Parses the JSON channel format, e.g.
    /// `{"q": 27, "eps": {"1": 0.1, "3": 0.2, "9": 0.3, "27": 0.4}}`.
    /// Keys are decimal divisor strings; unknown top-level fields are
    /// ignored so emitted reports stay loadable.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(text)?;
        file.into_gec()
    }

    /// Serializes to the JSON channel format with divisor keys in ascending
    /// numeric order.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut eps = serde_json::Map::new();
        for (i, &d) in self.lattice.divisors().iter().enumerate() {
            eps.insert(d.to_string(), serde_json::json!(self.eps[i]));
        }
        serde_json::json!({ "q": self.q(), "eps": eps })
    }
}

/// Serde form of the channel file schema.
#[derive(Debug, Serialize, Deserialize)]
struct ChannelFile {
    q: u64,
    eps: BTreeMap<String, f64>,
}

impl ChannelFile {
    fn into_gec(self) -> Result<Gec> {
        let mut entries = Vec::with_capacity(self.eps.len());
        for (key, value) in self.eps {
            let d: u64 = key
                .parse()
                .map_err(|_| Error::ChannelFile(format!("eps key {key:?} is not an integer")))?;
            entries.push((d, value));
        }
        Gec::new(self.q, entries)
    }
}

/// Rescales a nonnegative vector to unit sum, then nudges its largest entry
/// until the floating-point sum is exactly 1.
pub(crate) fn normalize_exact(eps: &mut [f64]) {
    let sum: f64 = eps.iter().sum();
    if sum > 0.0 && sum != 1.0 {
        for e in eps.iter_mut() {
            *e /= sum;
        }
    }
    for _ in 0..8 {
        let s: f64 = eps.iter().sum();
        if s == 1.0 {
            return;
        }
        let imax = eps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        eps[imax] += 1.0 - s;
    }
}

/// An output symbol of an explicit channel. Residue classes label the
/// erasure-channel outputs; pairs and input-tagged pairs label the outputs
/// produced by the raw polar transforms; merged symbols inherit the smallest
/// label of their class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// The residue class `residue` modulo `modulus`.
    Residue { modulus: u64, residue: u64 },
    /// An ordered pair of component observations.
    Pair(Box<Label>, Box<Label>),
    /// A pair of observations together with a revealed input symbol.
    Tagged(Box<Label>, Box<Label>, u64),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Residue { modulus, residue } => write!(f, "{residue} mod {modulus}"),
            Label::Pair(a, b) => write!(f, "({a}, {b})"),
            Label::Tagged(a, b, u) => write!(f, "({a}, {b}; {u})"),
        }
    }
}

/// A discrete memoryless channel as a raw transition matrix: one row per
/// input `x` in `0..q`, one column per output label.
#[derive(Debug, Clone)]
pub struct ExplicitDmc {
    q: u64,
    outputs: Vec<Label>,
    /// Row-major `q x outputs.len()` transition probabilities.
    w: Vec<f64>,
}

impl ExplicitDmc {
    /// Validates row sums (1 within 1e-12), nonnegative entries, and label
    /// uniqueness.
    pub fn new(q: u64, outputs: Vec<Label>, w: Vec<f64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::AlphabetTooSmall(0));
        }
        let cols = outputs.len();
        if w.len() != q as usize * cols {
            return Err(Error::MatrixShape {
                rows: q as usize,
                cols,
                len: w.len(),
            });
        }
        {
            let mut seen = std::collections::HashSet::with_capacity(cols);
            for label in &outputs {
                if !seen.insert(label) {
                    return Err(Error::DuplicateLabel(label.to_string()));
                }
            }
        }
        for row in 0..q as usize {
            let mut sum = 0.0;
            for col in 0..cols {
                let value = w[row * cols + col];
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::BadEntry { row, col, value });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::RowSum { row, sum });
            }
        }
        Ok(ExplicitDmc { q, outputs, w })
    }

    pub(crate) fn from_raw_parts(q: u64, outputs: Vec<Label>, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), q as usize * outputs.len());
        ExplicitDmc { q, outputs, w }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn outputs(&self) -> &[Label] {
        &self.outputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Transition row for input `x`.
    pub fn row(&self, x: u64) -> &[f64] {
        let cols = self.outputs.len();
        &self.w[x as usize * cols..(x as usize + 1) * cols]
    }

    /// W(y | x) by output index.
    pub fn prob(&self, x: u64, y: usize) -> f64 {
        self.w[x as usize * self.outputs.len() + y]
    }

    /// Column `y` as a vector over inputs.
    pub fn column(&self, y: usize) -> Vec<f64> {
        (0..self.q).map(|x| self.prob(x, y)).collect()
    }
}
