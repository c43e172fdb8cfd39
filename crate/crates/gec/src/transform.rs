//! The one-step polar transform on generalized erasure channels.
//!
//! Combining two uses of a channel with eps vector `(eps_d)` through the
//! kernel `(u1, u2) -> u1 + gamma*u2 mod q` yields, after merging equivalent
//! outputs, two channels of the same family:
//!
//! ```text
//!   eps_d^- = sum over ordered divisor pairs with gcd(d1, d2) = d  of eps_d1 eps_d2
//!   eps_d^+ = sum over ordered divisor pairs with lcm(d1, d2) = d  of eps_d1 eps_d2
//! ```
//!
//! The result is the same for every unit multiplier gamma, so the transform
//! at this level carries no kernel parameter; the oracle module exercises
//! gamma explicitly on raw matrices.
//!
//! When q is a prime power the divisor lattice is a chain and the convolution
//! collapses to one prefix/suffix-sum pass:
//!
//! ```text
//!   eps_d^- = eps_d * (eps_d + 2 * sum of eps_d' over d' > d)
//!   eps_d^+ = eps_d * (eps_d + 2 * sum of eps_d' over d' < d)
//! ```
//!
//! in which case eps_d^- + eps_d^+ = 2 eps_d holds coordinatewise. Every
//! ordered pair lands in exactly one gcd bucket and one lcm bucket, so both
//! outputs are probability vectors with no renormalization.

use std::sync::Arc;

use crate::channel::Gec;
use crate::divisors::DivisorSet;
use crate::error::{Error, Result};

/// General convolution over ordered divisor pairs through a precomputed
/// bucket-index table. This is the innermost kernel of the tree sweeps.
fn convolve_into(table: &[usize], eps: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    let len = eps.len();
    for i in 0..len {
        let ei = eps[i];
        if ei == 0.0 {
            continue;
        }
        let row = &table[i * len..(i + 1) * len];
        for j in 0..len {
            out[row[j]] += ei * eps[j];
        }
    }
}

/// Chain fast path: eps_d^- via one suffix-sum pass.
fn chain_minus_into(eps: &[f64], out: &mut [f64]) {
    let mut suffix = 0.0;
    for i in (0..eps.len()).rev() {
        out[i] = eps[i] * (eps[i] + 2.0 * suffix);
        suffix += eps[i];
    }
}

/// Chain fast path: eps_d^+ via one prefix-sum pass.
fn chain_plus_into(eps: &[f64], out: &mut [f64]) {
    let mut prefix = 0.0;
    for i in 0..eps.len() {
        out[i] = eps[i] * (eps[i] + 2.0 * prefix);
        prefix += eps[i];
    }
}

/// Degraded-branch eps, dispatching to the chain pass on prime powers.
pub(crate) fn minus_into(lattice: &DivisorSet, eps: &[f64], out: &mut [f64]) {
    if lattice.prime_power().is_some() {
        chain_minus_into(eps, out);
    } else {
        convolve_into(lattice.pair_gcd_table(), eps, out);
    }
}

/// Upgraded-branch eps, dispatching to the chain pass on prime powers.
pub(crate) fn plus_into(lattice: &DivisorSet, eps: &[f64], out: &mut [f64]) {
    if lattice.prime_power().is_some() {
        chain_plus_into(eps, out);
    } else {
        convolve_into(lattice.pair_lcm_table(), eps, out);
    }
}

impl Gec {
    /// The degraded ("minus") branch of the one-step polar transform, by the
    /// general gcd convolution.
    pub fn polar_minus(&self) -> Gec {
        let mut out = vec![0.0; self.eps().len()];
        convolve_into(self.lattice().pair_gcd_table(), self.eps(), &mut out);
        Gec::from_raw_parts(Arc::clone(self.lattice()), out)
    }

    /// The upgraded ("plus") branch of the one-step polar transform, by the
    /// general lcm convolution.
    pub fn polar_plus(&self) -> Gec {
        let mut out = vec![0.0; self.eps().len()];
        convolve_into(self.lattice().pair_lcm_table(), self.eps(), &mut out);
        Gec::from_raw_parts(Arc::clone(self.lattice()), out)
    }

    /// Degraded branch via the O(|D_q|) suffix-sum pass. Errors unless q is
    /// a prime power.
    pub fn polar_minus_prime_power(&self) -> Result<Gec> {
        self.require_prime_power()?;
        let mut out = vec![0.0; self.eps().len()];
        chain_minus_into(self.eps(), &mut out);
        Ok(Gec::from_raw_parts(Arc::clone(self.lattice()), out))
    }

    /// Upgraded branch via the O(|D_q|) prefix-sum pass. Errors unless q is
    /// a prime power.
    pub fn polar_plus_prime_power(&self) -> Result<Gec> {
        self.require_prime_power()?;
        let mut out = vec![0.0; self.eps().len()];
        chain_plus_into(self.eps(), &mut out);
        Ok(Gec::from_raw_parts(Arc::clone(self.lattice()), out))
    }

    fn require_prime_power(&self) -> Result<()> {
        if self.lattice().prime_power().is_none() {
            return Err(Error::NotPrimePower(self.q()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{Alpha, ALPHA_GRID};
    use crate::divisors::gcd;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    /// Independent oracle: exhaustive double sum with naive integer gcd/lcm,
    /// no index tables.
    fn naive_transform(v: &Gec, use_lcm: bool) -> Vec<f64> {
        let divisors = v.lattice().divisors();
        let mut out = vec![0.0; divisors.len()];
        for (i, &d1) in divisors.iter().enumerate() {
            for (j, &d2) in divisors.iter().enumerate() {
                let g = gcd(d1, d2);
                let bucket = if use_lcm { d1 / g * d2 } else { g };
                let k = divisors.iter().position(|&d| d == bucket).unwrap();
                out[k] += v.eps()[i] * v.eps()[j];
            }
        }
        out
    }

    fn senary() -> Gec {
        Gec::new(6, [(1, 0.1), (2, 0.2), (3, 0.3), (6, 0.4)]).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn bec_reduction() {
        for k in 0..=20 {
            let eps = k as f64 / 20.0;
            let v = Gec::from_bec(eps).unwrap();
            let minus = v.polar_minus();
            let plus = v.polar_plus();
            assert!((minus.eps()[0] - (2.0 * eps - eps * eps)).abs() < 1e-15);
            assert!((minus.eps()[1] - (1.0 - eps) * (1.0 - eps)).abs() < 1e-15);
            assert!((plus.eps()[0] - eps * eps).abs() < 1e-15);
            assert!((plus.eps()[1] - (1.0 - eps * eps)).abs() < 1e-15);
        }
    }

    #[test]
    fn senary_example_exact_values() {
        let v = senary();
        let minus = v.polar_minus();
        let plus = v.polar_plus();
        let expect_minus = [0.31, 0.20, 0.33, 0.16];
        let expect_plus = [0.01, 0.08, 0.15, 0.76];
        assert!(max_abs_diff(minus.eps(), &expect_minus) < 1e-15);
        assert!(max_abs_diff(plus.eps(), &expect_plus) < 1e-15);
        // same values from the independent exhaustive oracle
        assert!(max_abs_diff(&naive_transform(&v, false), &expect_minus) < 1e-15);
        assert!(max_abs_diff(&naive_transform(&v, true), &expect_plus) < 1e-15);
    }

    #[test]
    fn one_point_vectors_are_fixed_points() {
        for q in [6u64, 27] {
            let lattice = Arc::new(DivisorSet::new(q).unwrap());
            for idx in 0..lattice.len() {
                let mut eps = vec![0.0; lattice.len()];
                eps[idx] = 1.0;
                let v = Gec::from_eps(Arc::clone(&lattice), eps.clone()).unwrap();
                assert_eq!(v.polar_minus().eps(), &eps[..]);
                assert_eq!(v.polar_plus().eps(), &eps[..]);
            }
        }
    }

    #[test]
    fn convolution_matches_naive_oracle_on_random_channels() {
        let mut rng = StdRng::seed_from_u64(99);
        for q in [2u64, 3, 4, 6, 8, 9, 12, 27, 30, 360] {
            for _ in 0..20 {
                let v = Gec::random(q, &mut rng).unwrap();
                assert!(max_abs_diff(v.polar_minus().eps(), &naive_transform(&v, false)) < 1e-15);
                assert!(max_abs_diff(v.polar_plus().eps(), &naive_transform(&v, true)) < 1e-15);
            }
        }
    }

    #[test]
    fn outputs_are_probability_vectors() {
        let mut rng = StdRng::seed_from_u64(5);
        for q in [2u64, 6, 12, 27, 30] {
            for _ in 0..50 {
                let v = Gec::random(q, &mut rng).unwrap();
                for side in [v.polar_minus(), v.polar_plus()] {
                    assert!((side.eps().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
                    assert!(side.eps().iter().all(|&e| e >= 0.0));
                }
            }
        }
    }

    #[test]
    fn prime_power_example_values() {
        let v = Gec::new(27, [(1, 0.1), (3, 0.2), (9, 0.3), (27, 0.4)]).unwrap();
        let minus = v.polar_minus_prime_power().unwrap();
        assert!(max_abs_diff(minus.eps(), &[0.19, 0.32, 0.33, 0.16]) < 1e-15);
        // uniform over the divisors of 8: the top level keeps 1/16
        let u = Gec::new(8, [(1, 0.25), (2, 0.25), (4, 0.25), (8, 0.25)]).unwrap();
        let m = u.polar_minus_prime_power().unwrap();
        assert!((m.eps()[3] - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn fast_path_agrees_with_general_convolution() {
        let mut rng = StdRng::seed_from_u64(31);
        for q in [2u64, 3, 4, 8, 9, 16, 27, 32, 125, 1024] {
            for _ in 0..20 {
                let v = Gec::random(q, &mut rng).unwrap();
                let fm = v.polar_minus_prime_power().unwrap();
                let fp = v.polar_plus_prime_power().unwrap();
                assert!(
                    max_abs_diff(fm.eps(), v.polar_minus().eps()) < 1e-15,
                    "q={q}"
                );
                assert!(
                    max_abs_diff(fp.eps(), v.polar_plus().eps()) < 1e-15,
                    "q={q}"
                );
            }
        }
    }

    #[test]
    fn fast_path_rejects_composite_q() {
        let v = senary();
        assert!(matches!(
            v.polar_minus_prime_power(),
            Err(Error::NotPrimePower(6))
        ));
        assert!(matches!(
            v.polar_plus_prime_power(),
            Err(Error::NotPrimePower(6))
        ));
    }

    #[test]
    fn prime_power_conservation_holds_and_composite_fails() {
        let mut rng = StdRng::seed_from_u64(77);
        for q in [2u64, 4, 9, 27, 1024] {
            for _ in 0..50 {
                let v = Gec::random(q, &mut rng).unwrap();
                let minus = v.polar_minus();
                let plus = v.polar_plus();
                for i in 0..v.eps().len() {
                    let gap = (minus.eps()[i] + plus.eps()[i] - 2.0 * v.eps()[i]).abs();
                    assert!(gap <= 1e-15, "q={q} i={i} gap={gap}");
                }
            }
        }
        // the senary example violates it at d = 1: 0.31 + 0.01 vs 0.20
        let v = senary();
        let gap = v.polar_minus().eps()[0] + v.polar_plus().eps()[0] - 2.0 * v.eps()[0];
        assert!((gap - 0.12).abs() < 1e-12);
    }

    #[test]
    fn shannon_capacity_is_conserved_for_every_q() {
        let mut rng = StdRng::seed_from_u64(123);
        for q in [2u64, 3, 4, 6, 8, 9, 12, 27, 30] {
            for _ in 0..20 {
                let v = Gec::random(q, &mut rng).unwrap();
                let total =
                    v.polar_minus().i_alpha(Alpha::ONE) + v.polar_plus().i_alpha(Alpha::ONE);
                assert!((total - 2.0 * v.i_alpha(Alpha::ONE)).abs() < 1e-12, "q={q}");
            }
        }
    }

    #[test]
    fn order_alpha_inequalities_on_prime_powers() {
        let mut rng = StdRng::seed_from_u64(4242);
        let mut checked = 0;
        for q in [2u64, 3, 4, 8, 9, 27, 125] {
            for _ in 0..20 {
                let v = Gec::random(q, &mut rng).unwrap();
                let minus = v.polar_minus();
                let plus = v.polar_plus();
                for a in ALPHA_GRID {
                    let slack = minus.i_alpha(a) + plus.i_alpha(a) - 2.0 * v.i_alpha(a);
                    if a.value() <= 1.0 {
                        assert!(slack >= -1e-12, "q={q} alpha={a} slack={slack}");
                    }
                    if a.value() >= 1.0 {
                        assert!(slack <= 1e-12, "q={q} alpha={a} slack={slack}");
                    }
                }
                checked += 1;
            }
        }
        assert!(checked >= 100);
    }

    #[test]
    fn support_signs_are_preserved_on_prime_powers() {
        let lattice = Arc::new(DivisorSet::new(81).unwrap());
        let v = Gec::from_eps(lattice, vec![0.5, 0.0, 0.25, 0.0, 0.25]).unwrap();
        for side in [v.polar_minus(), v.polar_plus()] {
            for i in 0..v.eps().len() {
                assert_eq!(side.eps()[i] > 0.0, v.eps()[i] > 0.0, "i={i}");
            }
        }
    }
}
