//! Generalized erasure channels over divisor lattices.
//!
//! A q-ary generalized erasure channel delivers, on input x, the residue
//! class of x modulo d with probability eps_d, one probability per divisor d
//! of q. The family is closed under the polar transform: both branches are
//! again channels of the family, with eps vectors given by gcd/lcm
//! convolutions of the original. That closure makes everything about
//! polarization exactly computable by propagating small probability vectors
//! instead of exponentially growing transition matrices.
//!
//! The crate provides:
//!
//! - [`channel::Gec`]: the channel type, special-case constructors, JSON
//!   loading, and conversion to an explicit matrix ([`channel::ExplicitDmc`]).
//! - [`capacity`]: symmetric capacities of every order in `[0, inf]`, error
//!   probability, Bhattacharyya distance, and the Gallager exponent, with
//!   closed forms on erasure vectors and generic formulas on matrices.
//! - [`transform`]: the one-step recursion, with an O(|D_q|) fast path when
//!   q is a prime power.
//! - [`tree`]: streaming sweeps over all 2^n virtual channels: level
//!   histograms, exact capacity averages, and per-leaf dumps.
//! - [`oracle`]: brute-force verification that raw matrix transforms, after
//!   merging equivalent outputs, reproduce the convolution prediction for
//!   every unit kernel multiplier.
//! - [`martingale`]: reproducible Monte-Carlo simulation of the polarization
//!   process and its limit distribution.

pub mod capacity;
pub mod channel;
pub mod divisors;
pub mod error;
pub mod martingale;
pub mod oracle;
pub mod transform;
pub mod tree;

pub use capacity::{Alpha, ALPHA_GRID};
pub use channel::{ExplicitDmc, Gec, Label};
pub use divisors::DivisorSet;
pub use error::{Error, Result};
pub use tree::{Branch, LevelHistogram, PolarPath};
