//! Ground-truth verification of the transform recursion.
//!
//! The functions here perform the polar transform the expensive way, on raw
//! transition matrices: the degraded branch marginalizes the partner input,
//! the upgraded branch reveals it, and output symbols whose posterior input
//! distributions coincide are merged into one symbol (which changes no
//! capacity of any order). [`certify`] then walks every path of bounded
//! depth and checks that the merged raw channel matches, column for column
//! and capacity for capacity, the erasure channel predicted by the gcd/lcm
//! convolution. The kernel multiplier gamma must be a unit modulo q; every
//! unit must produce the same merged channel.
//!
//! Alphabets grow as |Y|^2 (degraded) and |Y|^2 * q (upgraded) per step, so
//! merging runs after every step and q and the depth are capped.

use serde::Serialize;

use crate::capacity::CERTIFY_ALPHA_GRID;
use crate::channel::{ExplicitDmc, Gec, Label};
use crate::divisors::is_unit;
use crate::error::{Error, Result};

/// Posterior entries are quantized to this grid to group equivalent outputs;
/// exact float equality is brittle after two convolution layers.
pub const POSTERIOR_QUANTUM: f64 = 1e-9;

/// Default caps: raw sweeps are exponential in both parameters.
pub const DEFAULT_MAX_Q: u64 = 12;
pub const DEFAULT_MAX_DEPTH: u32 = 3;

/// The combining kernel: `u1 + gamma * u2 mod q`.
pub fn kernel_combine(u1: u64, u2: u64, gamma: u64, q: u64) -> u64 {
    debug_assert!(u1 < q && u2 < q && gamma < q);
    (u1 + gamma * u2) % q
}

fn check_unit(gamma: u64, q: u64) -> Result<()> {
    if !is_unit(gamma, q)? {
        return Err(Error::GammaNotUnit { gamma, q });
    }
    Ok(())
}

/// The degraded branch on a raw matrix: output alphabet is all ordered pairs
/// of parent outputs, and the partner input is averaged out.
pub fn raw_minus(w: &ExplicitDmc, gamma: u64) -> Result<ExplicitDmc> {
    let q = w.q();
    check_unit(gamma, q)?;
    let parent = w.num_outputs();
    let outputs: Vec<Label> = (0..parent)
        .flat_map(|y1| {
            (0..parent).map(move |y2| {
                Label::Pair(
                    Box::new(w.outputs()[y1].clone()),
                    Box::new(w.outputs()[y2].clone()),
                )
            })
        })
        .collect();
    let cols = parent * parent;
    let inv_q = 1.0 / q as f64;
    let mut matrix = vec![0.0; q as usize * cols];
    for u1 in 0..q {
        let row = &mut matrix[u1 as usize * cols..(u1 as usize + 1) * cols];
        for u2 in 0..q {
            let x1 = kernel_combine(u1, u2, gamma, q);
            for y1 in 0..parent {
                let w1 = w.prob(x1, y1);
                if w1 == 0.0 {
                    continue;
                }
                for y2 in 0..parent {
                    row[y1 * parent + y2] += inv_q * w1 * w.prob(u2, y2);
                }
            }
        }
    }
    Ok(ExplicitDmc::from_raw_parts(q, outputs, matrix))
}

/// The upgraded branch on a raw matrix: output alphabet is all ordered pairs
/// of parent outputs tagged with the revealed first input.
pub fn raw_plus(w: &ExplicitDmc, gamma: u64) -> Result<ExplicitDmc> {
    let q = w.q();
    check_unit(gamma, q)?;
    let parent = w.num_outputs();
    let outputs: Vec<Label> = (0..parent)
        .flat_map(|y1| {
            (0..parent).flat_map(move |y2| {
                (0..q).map(move |u1| {
                    Label::Tagged(
                        Box::new(w.outputs()[y1].clone()),
                        Box::new(w.outputs()[y2].clone()),
                        u1,
                    )
                })
            })
        })
        .collect();
    let cols = parent * parent * q as usize;
    let inv_q = 1.0 / q as f64;
    let mut matrix = vec![0.0; q as usize * cols];
    for u2 in 0..q {
        let row = &mut matrix[u2 as usize * cols..(u2 as usize + 1) * cols];
        for u1 in 0..q {
            let x1 = kernel_combine(u1, u2, gamma, q);
            for y1 in 0..parent {
                let w1 = w.prob(x1, y1);
                if w1 == 0.0 {
                    continue;
                }
                for y2 in 0..parent {
                    row[(y1 * parent + y2) * q as usize + u1 as usize] +=
                        inv_q * w1 * w.prob(u2, y2);
                }
            }
        }
    }
    Ok(ExplicitDmc::from_raw_parts(q, outputs, matrix))
}

/// Merges output symbols whose posterior input distributions agree (within
/// the quantization grid) into one symbol carrying the summed column, and
/// drops outputs of zero probability. Idempotent, and invariant for every
/// capacity order.
pub fn merge_outputs(w: &ExplicitDmc) -> ExplicitDmc {
    let q = w.q();
    let cols = w.num_outputs();
    let mut groups: std::collections::HashMap<Vec<i64>, Vec<usize>> =
        std::collections::HashMap::new();
    for y in 0..cols {
        let column = w.column(y);
        let total: f64 = column.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let key: Vec<i64> = column
            .iter()
            .map(|&value| (value / total / POSTERIOR_QUANTUM).round() as i64)
            .collect();
        groups.entry(key).or_default().push(y);
    }
    let mut merged: Vec<(Label, Vec<f64>)> = groups
        .into_values()
        .map(|members| {
            let label = members
                .iter()
                .map(|&y| &w.outputs()[y])
                .min()
                .expect("nonempty group")
                .clone();
            let mut column = vec![0.0; q as usize];
            for &y in &members {
                for x in 0..q {
                    column[x as usize] += w.prob(x, y);
                }
            }
            (label, column)
        })
        .collect();
    merged.sort_by(|a, b| a.0.cmp(&b.0));
    let outputs: Vec<Label> = merged.iter().map(|(label, _)| label.clone()).collect();
    let mut matrix = vec![0.0; q as usize * outputs.len()];
    for (y, (_, column)) in merged.iter().enumerate() {
        for x in 0..q as usize {
            matrix[x * outputs.len() + y] = column[x];
        }
    }
    ExplicitDmc::from_raw_parts(q, outputs, matrix)
}

/// Caps for [`certify_with`].
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub max_q: u64,
    pub max_depth: u32,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            max_q: DEFAULT_MAX_Q,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Outcome of one certification run.
#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub q: u64,
    pub gamma: u64,
    pub depth: u32,
    /// Largest entrywise gap between the merged raw channel and the
    /// predicted channel after canonical column alignment.
    pub max_struct_dev: f64,
    /// Largest capacity gap over the certification alpha grid.
    pub max_ialpha_dev: f64,
    /// Number of paths examined, the empty path included.
    pub paths_checked: u64,
}

/// Walks every transform path of length at most `depth`, carrying the raw
/// matrix (merged after each step) alongside the convolution prediction, and
/// reports the worst structural and capacity deviations seen.
pub fn certify(v: &Gec, gamma: u64, depth: u32) -> Result<CertifyReport> {
    certify_with(v, gamma, depth, &CertifyOptions::default())
}

pub fn certify_with(
    v: &Gec,
    gamma: u64,
    depth: u32,
    opts: &CertifyOptions,
) -> Result<CertifyReport> {
    let q = v.q();
    if q > opts.max_q {
        return Err(Error::OracleAlphabetTooLarge { q, cap: opts.max_q });
    }
    if depth > opts.max_depth {
        return Err(Error::OracleDepth {
            requested: depth,
            cap: opts.max_depth,
        });
    }
    check_unit(gamma, q)?;

    let mut report = CertifyReport {
        q,
        gamma,
        depth,
        max_struct_dev: 0.0,
        max_ialpha_dev: 0.0,
        paths_checked: 0,
    };
    let root = merge_outputs(&v.to_dmc());
    let mut stack: Vec<(ExplicitDmc, Gec, u32)> = vec![(root, v.clone(), 0)];
    while let Some((raw, predicted, level)) = stack.pop() {
        let (struct_dev, ialpha_dev) = compare_against_prediction(&raw, &predicted);
        report.max_struct_dev = report.max_struct_dev.max(struct_dev);
        report.max_ialpha_dev = report.max_ialpha_dev.max(ialpha_dev);
        report.paths_checked += 1;
        if level < depth {
            stack.push((
                merge_outputs(&raw_minus(&raw, gamma)?),
                predicted.polar_minus(),
                level + 1,
            ));
            stack.push((
                merge_outputs(&raw_plus(&raw, gamma)?),
                predicted.polar_plus(),
                level + 1,
            ));
        }
    }
    Ok(report)
}

fn compare_against_prediction(raw: &ExplicitDmc, predicted: &Gec) -> (f64, f64) {
    let expected = predicted.to_dmc_support();
    let struct_dev = if raw.num_outputs() == expected.num_outputs() {
        let mut raw_cols: Vec<Vec<f64>> = (0..raw.num_outputs()).map(|y| raw.column(y)).collect();
        let mut expected_cols: Vec<Vec<f64>> = (0..expected.num_outputs())
            .map(|y| expected.column(y))
            .collect();
        raw_cols.sort_by(|a, b| canonical_column_cmp(a, b));
        expected_cols.sort_by(|a, b| canonical_column_cmp(a, b));
        raw_cols
            .iter()
            .flatten()
            .zip(expected_cols.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    // Capacities are compared matrix-to-matrix so both sides count support
    // with the same threshold; the order-0 capacity is discontinuous in the
    // support, and masses driven below the threshold by repeated squaring
    // must be treated identically on both routes.
    let ialpha_dev = CERTIFY_ALPHA_GRID
        .iter()
        .map(|&a| (raw.i_alpha(a) - expected.i_alpha(a)).abs())
        .fold(0.0, f64::max);
    (struct_dev, ialpha_dev)
}

/// Column order that is stable under numerical noise: compare on the
/// quantized grid first, then exactly.
fn canonical_column_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let qx = (x / POSTERIOR_QUANTUM).round() as i64;
        let qy = (y / POSTERIOR_QUANTUM).round() as i64;
        match qx.cmp(&qy) {
            std::cmp::Ordering::Equal => {}
            other => return other,
        }
    }
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => {}
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}
