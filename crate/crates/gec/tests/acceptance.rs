//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them all).
//!
//! Criterion 6 is known red: its mass windows were calibrated against the
//! depth-25 sweep but the criterion pins depth 20, where the deterministic
//! masses land just outside them. The sweep is cross-checked against an
//! independent implementation, so the test keeps the windows as written and
//! reports the measured values instead of loosening thresholds to pass.

use gec::capacity::ALPHA_GRID;
use gec::divisors::units;
use gec::martingale::{limit_distribution, ProcessConfig};
use gec::oracle::certify_with;
use gec::tree::{average_i_alpha, evolve_histogram};
use gec::{Alpha, ExplicitDmc, Gec, Label};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn report(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number} ({name}): {} -- {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn random_gec(q: u64, rng: &mut StdRng) -> Gec {
    Gec::random(q, rng).expect("valid q")
}

fn random_dmc(q: u64, outputs: usize, rng: &mut StdRng) -> ExplicitDmc {
    let labels: Vec<Label> = (0..outputs as u64)
        .map(|r| Label::Residue {
            modulus: u64::MAX,
            residue: r,
        })
        .collect();
    let mut w = Vec::with_capacity(q as usize * outputs);
    for _ in 0..q {
        let raw: Vec<f64> = (0..outputs)
            .map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln())
            .collect();
        let sum: f64 = raw.iter().sum();
        w.extend(raw.iter().map(|e| e / sum));
    }
    // nudge each row onto an exact unit sum
    for row in 0..q as usize {
        let slice = &mut w[row * outputs..(row + 1) * outputs];
        for _ in 0..4 {
            let s: f64 = slice.iter().sum();
            if s == 1.0 {
                break;
            }
            let imax = slice
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            slice[imax] += 1.0 - s;
        }
    }
    ExplicitDmc::new(q, labels, w).expect("row-stochastic by construction")
}

const PRIME_POWERS: [u64; 16] = [2, 3, 4, 5, 7, 8, 9, 16, 25, 27, 32, 64, 81, 125, 128, 243];
const MIXED_Q: [u64; 9] = [2, 3, 4, 6, 8, 9, 12, 27, 30];

/// Criterion 1: the binary special case reduces to the classical
/// erasure-probability recursion, exactly.
#[test]
fn criterion_1_bec_reduction() {
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let eps = k as f64 / 99.0;
        let v = Gec::from_bec(eps).unwrap();
        let minus = v.polar_minus().eps()[0];
        let plus = v.polar_plus().eps()[0];
        worst = worst
            .max((minus - (2.0 * eps - eps * eps)).abs())
            .max((plus - eps * eps).abs());
    }
    report(
        1,
        "bec reduction",
        worst < 1e-15,
        &format!("max |recursion - closed form| = {worst:e} over 100 erasure probabilities"),
    );
}

/// Criterion 2: merged raw-matrix transforms match the convolution
/// prediction for every unit multiplier, at every path of bounded depth.
#[test]
fn criterion_2_oracle_certification() {
    let opts = gec::oracle::CertifyOptions {
        max_q: 12,
        max_depth: 3,
    };
    let mut worst_struct: f64 = 0.0;
    let mut worst_ialpha: f64 = 0.0;
    let mut runs = 0u64;
    for q in [2u64, 3, 4, 5, 6, 8, 9, 12] {
        let depth = if q <= 4 { 3 } else { 2 };
        let mut rng = StdRng::seed_from_u64(0x0acce97 + q);
        for _ in 0..20 {
            let v = random_gec(q, &mut rng);
            for gamma in units(q).unwrap() {
                let r = certify_with(&v, gamma, depth, &opts).unwrap();
                worst_struct = worst_struct.max(r.max_struct_dev);
                worst_ialpha = worst_ialpha.max(r.max_ialpha_dev);
                runs += 1;
            }
        }
    }
    report(
        2,
        "oracle certification",
        worst_struct < 1e-12 && worst_ialpha < 1e-10,
        &format!(
            "{runs} certification runs: max structural deviation {worst_struct:e}, max capacity deviation {worst_ialpha:e}"
        ),
    );
}

/// Criterion 3: coordinatewise conservation on prime powers, its violation
/// on the senary example, and Shannon-capacity conservation for every q.
#[test]
fn criterion_3_conservation_laws() {
    let mut rng = StdRng::seed_from_u64(0xc015);
    // (a) prime-power eps conservation, via the chain recursion
    let mut worst_pp: f64 = 0.0;
    for k in 0..1000 {
        let q = PRIME_POWERS[k % PRIME_POWERS.len()];
        let v = random_gec(q, &mut rng);
        let minus = v.polar_minus_prime_power().unwrap();
        let plus = v.polar_plus_prime_power().unwrap();
        for i in 0..v.eps().len() {
            worst_pp = worst_pp.max((minus.eps()[i] + plus.eps()[i] - 2.0 * v.eps()[i]).abs());
        }
    }
    // (b) the senary counterexample at d = 1
    let senary = Gec::new(6, [(1, 0.1), (2, 0.2), (3, 0.3), (6, 0.4)]).unwrap();
    let m1 = senary.polar_minus().eps()[0];
    let p1 = senary.polar_plus().eps()[0];
    let gap = (m1 + p1 - 0.2 - 0.12).abs();
    // (c) Shannon-capacity conservation for mixed q
    let mut worst_i1: f64 = 0.0;
    for k in 0..1000 {
        let q = MIXED_Q[k % MIXED_Q.len()];
        let v = random_gec(q, &mut rng);
        let total = v.polar_minus().i_alpha(Alpha::ONE) + v.polar_plus().i_alpha(Alpha::ONE);
        worst_i1 = worst_i1.max((total - 2.0 * v.i_alpha(Alpha::ONE)).abs());
    }
    report(
        3,
        "conservation laws",
        worst_pp <= 1e-15 && gap < 1e-12 && worst_i1 < 1e-12,
        &format!(
            "prime-power eps gap {worst_pp:e} (1000 channels); senary d=1 violation 0.32 vs 0.20 off by {gap:e}; capacity-conservation gap {worst_i1:e} (1000 channels)"
        ),
    );
}

/// Criterion 4: the one-step average of the order-alpha capacity moves the
/// right way on both sides of alpha = 1 for prime powers.
#[test]
fn criterion_4_inequality_suite() {
    let mut rng = StdRng::seed_from_u64(0x1eab);
    let mut worst_low: f64 = 0.0; // most negative slack for alpha <= 1
    let mut worst_high: f64 = 0.0; // most positive slack for alpha >= 1
    for k in 0..200 {
        let q = PRIME_POWERS[k % PRIME_POWERS.len()];
        let v = random_gec(q, &mut rng);
        let minus = v.polar_minus();
        let plus = v.polar_plus();
        for a in ALPHA_GRID {
            let slack = minus.i_alpha(a) + plus.i_alpha(a) - 2.0 * v.i_alpha(a);
            if a.value() <= 1.0 {
                worst_low = worst_low.min(slack);
            }
            if a.value() >= 1.0 {
                worst_high = worst_high.max(slack);
            }
        }
    }
    report(
        4,
        "inequality suite",
        worst_low >= -1e-12 && worst_high <= 1e-12,
        &format!(
            "200 prime-power channels x 9 orders: min slack {worst_low:e} (alpha <= 1), max slack {worst_high:e} (alpha >= 1)"
        ),
    );
}

/// Criterion 5: the q = 1024 uniform channel: exact capacity and the
/// ordering of the mean-capacity curves across depths.
#[test]
fn criterion_5_average_capacity_curves() {
    let lattice = std::sync::Arc::new(gec::DivisorSet::new(1024).unwrap());
    let v = Gec::from_eps(lattice, vec![1.0 / 11.0; 11]).unwrap();
    let cap_err = (v.i_alpha(Alpha::ONE) - 5.0 * 2f64.ln()).abs();
    let mut ordering_ok = true;
    let mut equality_err: f64 = 0.0;
    let mut detail_break = String::new();
    for a in ALPHA_GRID {
        let means: Vec<f64> = [0u32, 2, 8]
            .iter()
            .map(|&n| average_i_alpha(&v, n, a).unwrap())
            .collect();
        if a.is_one() {
            for m in &means {
                equality_err = equality_err.max((m - v.i_alpha(Alpha::ONE)).abs());
            }
            continue;
        }
        for pair in means.windows(2) {
            let ok = if a.value() < 1.0 {
                pair[1] >= pair[0] - 1e-12
            } else {
                pair[1] <= pair[0] + 1e-12
            };
            if !ok {
                ordering_ok = false;
                detail_break = format!("; ordering broken at alpha={a}: {means:?}");
            }
        }
    }
    report(
        5,
        "average capacity curves",
        cap_err < 1e-12 && ordering_ok && equality_err < 1e-10,
        &format!(
            "I1 - 5 ln 2 = {cap_err:e}; curves ordered over n in {{0,2,8}} at every grid order; alpha=1 equality gap {equality_err:e}{detail_break}"
        ),
    );
}

/// Criterion 6: q = 27 level masses at depth 20 within +-0.03 of the eps
/// vector, unclassified below 0.05, and monotone tightening by depth 22.
/// Known red: the deterministic depth-20 masses land just outside the first
/// two windows (they satisfy them at depth 25); the assertion documents the
/// measured values rather than widening the windows.
#[test]
fn criterion_6_multilevel_histogram_q27() {
    let v = Gec::new(27, [(1, 0.1), (3, 0.2), (9, 0.3), (27, 0.4)]).unwrap();
    let targets = [0.1, 0.2, 0.3, 0.4];
    let h20 = evolve_histogram(&v, 20, Alpha::ONE, 0.01).unwrap();
    let h22 = evolve_histogram(&v, 22, Alpha::ONE, 0.01).unwrap();
    let dev20: Vec<f64> = h20
        .levels
        .iter()
        .zip(targets)
        .map(|(l, t)| (l.mass - t).abs())
        .collect();
    let dev22: Vec<f64> = h22
        .levels
        .iter()
        .zip(targets)
        .map(|(l, t)| (l.mass - t).abs())
        .collect();
    let masses_ok = dev20.iter().all(|&d| d <= 0.03);
    let unclassified_ok = h20.unclassified < 0.05;
    let tightening_ok = dev20.iter().zip(&dev22).all(|(d20, d22)| d22 <= d20);
    let masses20: Vec<f64> = h20.levels.iter().map(|l| l.mass).collect();
    report(
        6,
        "q=27 multilevel histogram",
        masses_ok && unclassified_ok && tightening_ok,
        &format!(
            "n=20 masses {masses20:?} vs targets {targets:?} (max dev {:.4}, window 0.03), unclassified {:.4} (bound 0.05), n=22 tightens: {tightening_ok}",
            dev20.iter().fold(0.0f64, |a, &b| a.max(b)),
            h20.unclassified
        ),
    );
}

/// Criterion 7: the composite q = 30 channel polarizes (empirically) to the
/// four levels the figure annotates.
#[test]
fn criterion_7_composite_q30_histogram() {
    let v = Gec::new(
        30,
        [
            (1, 0.0),
            (2, 3.0 / 30.0),
            (3, 5.0 / 30.0),
            (5, 7.0 / 30.0),
            (6, 3.0 / 30.0),
            (10, 5.0 / 30.0),
            (15, 7.0 / 30.0),
            (30, 0.0),
        ],
    )
    .unwrap();
    let hist = evolve_histogram(&v, 20, Alpha::ONE, 0.1).unwrap();
    let named: f64 = [1u64, 5, 15, 30]
        .iter()
        .map(|&d| hist.mass_at(d).unwrap())
        .sum();
    let all: Vec<(u64, f64)> = hist.levels.iter().map(|l| (l.divisor, l.mass)).collect();
    report(
        7,
        "q=30 empirical histogram",
        named >= 0.9,
        &format!(
            "mass near {{0, ln5, ln15, ln30}} = {named:.4} (need >= 0.9); per-level masses {all:?}, unclassified {:.4}",
            hist.unclassified
        ),
    );
}

/// Criterion 8: the empirical limit distribution matches the initial eps
/// vector on a prime power, with seeded reproducible trials.
#[test]
fn criterion_8_martingale_limit_law() {
    let v = Gec::new(9, [(1, 0.2), (3, 0.3), (9, 0.5)]).unwrap();
    let config = ProcessConfig::new(v, 40, 10_000, 20250810);
    let trials = config.trials as f64;
    let report_data = limit_distribution(&config).unwrap();
    let mut freq_ok = true;
    let mut mean_ok = true;
    let mut detail = String::new();
    for (d, expect) in [(1u64, 0.2), (3, 0.3), (9, 0.5)] {
        let f = report_data.frequency_at(d);
        if (f - expect).abs() > 0.02 {
            freq_ok = false;
        }
        let sigma = (expect * (1.0 - expect) / trials).sqrt();
        let mean = report_data.terminal_mean_at(d);
        if (mean - expect).abs() > 4.0 * sigma {
            mean_ok = false;
        }
        detail.push_str(&format!("d={d}: freq {f:.4}, terminal mean {mean:.4}; "));
    }
    let unconverged_ok = report_data.unconverged < 0.01;
    report(
        8,
        "martingale limit law",
        freq_ok && unconverged_ok && mean_ok,
        &format!(
            "{detail}unconverged {:.4} (bound 0.01), seed {}",
            report_data.unconverged, config.seed
        ),
    );
}

/// Criterion 9: the capacity identity chain and monotonicity in the order,
/// on random explicit channels.
#[test]
fn criterion_9_capacity_identity_chain() {
    let mut rng = StdRng::seed_from_u64(0x1d31);
    let mut worst_cutoff: f64 = 0.0;
    let mut worst_top: f64 = 0.0;
    let mut monotone_ok = true;
    for _ in 0..500 {
        let q = rng.random_range(2..=8);
        let outputs = rng.random_range(2..=12);
        let w = random_dmc(q, outputs, &mut rng);
        let qf = q as f64;
        let cutoff = w.i_alpha(Alpha::HALF);
        let e0 = w.gallager_e0(1.0).unwrap();
        let z = w.bhattacharyya().unwrap();
        worst_cutoff = worst_cutoff
            .max((cutoff - e0).abs())
            .max((cutoff - (qf / (1.0 + (qf - 1.0) * z)).ln()).abs());
        let top = w.i_alpha(Alpha::INFINITY);
        worst_top = worst_top.max((top - (qf.ln() + (1.0 - w.error_probability()).ln())).abs());
        let mut prev = f64::NEG_INFINITY;
        for a in ALPHA_GRID {
            let value = w.i_alpha(a);
            if value < prev - 1e-12 {
                monotone_ok = false;
            }
            prev = value;
        }
    }
    report(
        9,
        "capacity identity chain",
        worst_cutoff < 1e-12 && worst_top < 1e-12 && monotone_ok,
        &format!(
            "500 random channels: cutoff-rate identity gap {worst_cutoff:e}, order-infinity identity gap {worst_top:e}, monotone in alpha: {monotone_ok}"
        ),
    );
}
