//! Monte-Carlo simulation of the polarization process.
//!
//! A trajectory applies n independent fair coin flips to the eps vector,
//! taking the degraded branch on tails and the upgraded branch on heads.
//! Each eps coordinate is a bounded martingale under this process, and for
//! prime-power q the terminal vector lands on a vertex of the simplex: the
//! channel polarizes to the noiseless-level-d channel with probability equal
//! to the initial eps_d. [`limit_distribution`] estimates those frequencies
//! empirically and reports the unconverged residual instead of forcing an
//! assignment.
//!
//! Randomness is counter-based: trial t draws from a ChaCha stream keyed by
//! (seed, t), so trials are independent, reproducible, and parallelizable
//! with no shared state.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::Gec;
use crate::error::{Error, Result};
use crate::transform::{minus_into, plus_into};

/// Parameters of a simulation run.
#[derive(Debug, Clone)]
pub struct ProcessConfig {
    pub initial: Gec,
    /// Transform steps per trajectory.
    pub steps: u32,
    /// Independent trajectories.
    pub trials: u64,
    pub seed: u64,
    /// A trial counts as converged to level d when its terminal eps_d
    /// exceeds 1 - convergence_delta.
    pub convergence_delta: f64,
}

impl ProcessConfig {
    pub fn new(initial: Gec, steps: u32, trials: u64, seed: u64) -> Self {
        ProcessConfig {
            initial,
            steps,
            trials,
            seed,
            convergence_delta: 1e-6,
        }
    }
}

/// Runs one trajectory and returns its terminal channel. Deterministic in
/// `(config.seed, trial_index)`.
///
/// Each step re-projects onto the probability simplex by absorbing the
/// ulp-scale rounding drift into the largest coordinate. Left alone, the
/// drift doubles per step and can decouple a coordinate from its complement
/// near a vertex, leaving trajectories stranded a hair off the absorbing
/// state; the projection pins them back without altering the dynamics above
/// rounding scale.
pub fn run_trial(config: &ProcessConfig, trial_index: u64) -> Gec {
    let lattice = config.initial.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial_index);
    let mut eps = config.initial.eps().to_vec();
    let mut next = vec![0.0; eps.len()];
    for _ in 0..config.steps {
        if rng.random::<bool>() {
            plus_into(lattice, &eps, &mut next);
        } else {
            minus_into(lattice, &eps, &mut next);
        }
        std::mem::swap(&mut eps, &mut next);
        project_to_simplex(&mut eps);
    }
    Gec::from_raw_parts(std::sync::Arc::clone(lattice), eps)
}

fn project_to_simplex(eps: &mut [f64]) {
    for _ in 0..4 {
        let sum: f64 = eps.iter().sum();
        if sum == 1.0 {
            return;
        }
        let imax = eps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        eps[imax] += 1.0 - sum;
    }
}

/// Empirical distribution of the polarization limit.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub q: u64,
    /// Initial erasure probabilities, keyed by decimal divisor.
    pub eps: BTreeMap<String, f64>,
    #[serde(rename = "n")]
    pub steps: u32,
    #[serde(rename = "N")]
    pub trials: u64,
    pub seed: u64,
    /// Fraction of trials whose terminal vector converged to each level.
    pub freq: BTreeMap<String, f64>,
    /// Fraction of trials converged to no level at the configured delta.
    pub unconverged: f64,
    /// Mean over divisors of |mean terminal eps_d - initial eps_d|.
    pub mean_abs_martingale_gap: f64,
    /// True when q is not a prime power, where the limit law is observed
    /// only empirically.
    pub empirical_only: bool,
    /// Mean terminal eps per divisor, for martingale checks.
    pub terminal_mean: BTreeMap<String, f64>,
}

impl LimitReport {
    pub fn frequency_at(&self, d: u64) -> f64 {
        self.freq.get(&d.to_string()).copied().unwrap_or(0.0)
    }

    pub fn terminal_mean_at(&self, d: u64) -> f64 {
        self.terminal_mean
            .get(&d.to_string())
            .copied()
            .unwrap_or(0.0)
    }
}

/// Runs `config.trials` trajectories and tallies which noiseless level each
/// one approaches. Trials run in parallel; tallies fold in trial order, so
/// the report is reproducible from `(seed, trials, steps)` alone.
pub fn limit_distribution(config: &ProcessConfig) -> Result<LimitReport> {
    if config.steps == 0 || config.trials == 0 {
        return Err(Error::EmptyProcess);
    }
    let lattice = config.initial.lattice();
    let len = lattice.len();
    let threshold = 1.0 - config.convergence_delta;

    let terminals: Vec<Vec<f64>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t).eps().to_vec())
        .collect();

    let mut counts = vec![0u64; len];
    let mut unconverged = 0u64;
    let mut sums = vec![0.0f64; len];
    for terminal in &terminals {
        match terminal.iter().position(|&e| e > threshold) {
            Some(i) => counts[i] += 1,
            None => unconverged += 1,
        }
        for (s, &e) in sums.iter_mut().zip(terminal) {
            *s += e;
        }
    }

    let trials = config.trials as f64;
    let divisors = lattice.divisors();
    let mut freq = BTreeMap::new();
    let mut terminal_mean = BTreeMap::new();
    let mut eps_map = BTreeMap::new();
    let mut gap = 0.0;
    for i in 0..len {
        let key = divisors[i].to_string();
        freq.insert(key.clone(), counts[i] as f64 / trials);
        let mean = sums[i] / trials;
        terminal_mean.insert(key.clone(), mean);
        eps_map.insert(key, config.initial.eps()[i]);
        gap += (mean - config.initial.eps()[i]).abs();
    }
    Ok(LimitReport {
        q: lattice.q(),
        eps: eps_map,
        steps: config.steps,
        trials: config.trials,
        seed: config.seed,
        freq,
        unconverged: unconverged as f64 / trials,
        mean_abs_martingale_gap: gap / len as f64,
        empirical_only: lattice.prime_power().is_none(),
        terminal_mean,
    })
}
