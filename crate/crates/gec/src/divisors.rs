//! Divisor-lattice plumbing: divisor enumeration, gcd/lcm pairing tables,
//! prime-power detection, and coprimality tests.
//!
//! The divisors of `q` form a lattice under divisibility (gcd is the meet,
//! lcm the join), so the gcd and lcm of any two divisors of `q` are again
//! divisors of `q` and the pairing tables below are total. They are built
//! once per `q` and shared by everything downstream: the pair convolutions
//! index straight into them.

use crate::error::{Error, Result};

/// Default upper bound on `q` accepted by [`DivisorSet::new`]. Trial division
/// is instant at this scale and the divisor count stays tiny.
pub const DEFAULT_Q_LIMIT: u64 = 1_000_000;

/// The divisors of a fixed `q >= 2`, in ascending order, with precomputed
/// gcd/lcm index tables over all ordered divisor pairs.
///
/// Immutable after construction; safe to share and send between threads.
#[derive(Debug, Clone)]
pub struct DivisorSet {
    q: u64,
    divisors: Vec<u64>,
    ln_divisors: Vec<f64>,
    // Flattened |D| x |D| tables: entry (i, j) is the index within `divisors`
    // of gcd(divisors[i], divisors[j]) resp. lcm(divisors[i], divisors[j]).
    pair_gcd_index: Vec<usize>,
    pair_lcm_index: Vec<usize>,
    prime_power: Option<(u64, u32)>,
}

impl DivisorSet {
    /// Builds the divisor set of `q` with the default size limit.
    pub fn new(q: u64) -> Result<Self> {
        Self::with_limit(q, DEFAULT_Q_LIMIT)
    }

    /// Builds the divisor set of `q`, rejecting `q` above `limit`.
    pub fn with_limit(q: u64, limit: u64) -> Result<Self> {
        if q < 2 {
            return Err(Error::AlphabetTooSmall(q));
        }
        if q > limit {
            return Err(Error::AlphabetTooLarge { q, limit });
        }
        let divisors = divisors_of(q);
        let len = divisors.len();
        let index_of = |d: u64| divisors.binary_search(&d).expect("lattice closure");
        let mut pair_gcd_index = vec![0usize; len * len];
        let mut pair_lcm_index = vec![0usize; len * len];
        for (i, &a) in divisors.iter().enumerate() {
            for (j, &b) in divisors.iter().enumerate() {
                let g = gcd(a, b);
                pair_gcd_index[i * len + j] = index_of(g);
                pair_lcm_index[i * len + j] = index_of(a / g * b);
            }
        }
        let ln_divisors = divisors.iter().map(|&d| (d as f64).ln()).collect();
        Ok(DivisorSet {
            q,
            divisors,
            ln_divisors,
            pair_gcd_index,
            pair_lcm_index,
            prime_power: prime_power(q),
        })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// All divisors of `q` in strictly ascending order; the index convention
    /// used by every probability vector downstream.
    pub fn divisors(&self) -> &[u64] {
        &self.divisors
    }

    /// Number of divisors, i.e. the length of every aligned eps vector.
    pub fn len(&self) -> usize {
        self.divisors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `d` within [`divisors`](Self::divisors), if `d` divides `q`.
    pub fn divisor_index(&self, d: u64) -> Option<usize> {
        self.divisors.binary_search(&d).ok()
    }

    /// Index of `gcd(divisors[i], divisors[j])`.
    #[inline]
    pub fn gcd_index(&self, i: usize, j: usize) -> usize {
        self.pair_gcd_index[i * self.divisors.len() + j]
    }

    /// Index of `lcm(divisors[i], divisors[j])`.
    #[inline]
    pub fn lcm_index(&self, i: usize, j: usize) -> usize {
        self.pair_lcm_index[i * self.divisors.len() + j]
    }

    /// Memoized natural logs of the divisors, aligned with
    /// [`divisors`](Self::divisors).
    pub fn ln_divisors(&self) -> &[f64] {
        &self.ln_divisors
    }

    /// `(p, m)` with `q = p^m` when `q` is a prime power.
    pub fn prime_power(&self) -> Option<(u64, u32)> {
        self.prime_power
    }

    pub(crate) fn pair_gcd_table(&self) -> &[usize] {
        &self.pair_gcd_index
    }

    pub(crate) fn pair_lcm_table(&self) -> &[usize] {
        &self.pair_lcm_index
    }
}

/// Returns `(p, m)` with `q = p^m` when `q >= 2` is a prime power, `None`
/// otherwise.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let factors = factorize(q);
    if factors.len() == 1 {
        Some(factors[0])
    } else {
        None
    }
}

/// True iff `gamma` is a unit of the ring of integers modulo `q`, i.e.
/// gcd(gamma, q) = 1. Errors when `gamma >= q`.
pub fn is_unit(gamma: u64, q: u64) -> Result<bool> {
    if q < 2 {
        return Err(Error::AlphabetTooSmall(q));
    }
    if gamma >= q {
        return Err(Error::GammaOutOfRange { gamma, q });
    }
    Ok(gcd(gamma, q) == 1)
}

/// All units modulo `q`, ascending.
pub fn units(q: u64) -> Result<Vec<u64>> {
    if q < 2 {
        return Err(Error::AlphabetTooSmall(q));
    }
    Ok((0..q).filter(|&g| gcd(g, q) == 1).collect())
}

pub(crate) fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn factorize(n: u64) -> Vec<(u64, u32)> {
    let mut factors = Vec::new();
    let mut x = n;
    let mut p = 2;
    while p * p <= x {
        if x.is_multiple_of(p) {
            let mut m = 0;
            while x.is_multiple_of(p) {
                x /= p;
                m += 1;
            }
            factors.push((p, m));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if x > 1 {
        factors.push((x, 1));
    }
    factors
}

fn divisors_of(q: u64) -> Vec<u64> {
    let mut divisors = vec![1u64];
    for (p, m) in factorize(q) {
        let base = divisors.clone();
        let mut power = 1u64;
        for _ in 0..m {
            power *= p;
            divisors.extend(base.iter().map(|d| d * power));
        }
    }
    divisors.sort_unstable();
    divisors
}
