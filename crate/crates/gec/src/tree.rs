//! n-step polarization over the full binary tree of virtual channels.
//!
//! A virtual channel is addressed by a bit path (most significant bit
//! first): bit 0 takes the degraded branch, bit 1 the upgraded branch. The
//! sweeps below walk all 2^n leaves depth-first without materializing them,
//! so memory stays at O(n * |D_q|) while the leaf count grows geometrically.
//!
//! [`evolve_histogram`] classifies each leaf capacity to the nearest level
//! `ln d` within a tolerance `delta` and reports the residual mass that lands
//! near no level, rather than forcing an assignment. Work can be split over
//! the top levels of the tree; all accumulators are integer counts merged in
//! subtree order, so results are identical for every worker count.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::thread;

use crate::capacity::{Alpha, AlphaEvaluator};
use crate::channel::Gec;
use crate::divisors::DivisorSet;
use crate::error::{Error, Result};
use crate::transform::{minus_into, plus_into};

/// Depth cap for histogram sweeps (2^28 leaves).
pub const HISTOGRAM_DEPTH_CAP: u32 = 28;
/// Depth cap for exact leaf averaging.
pub const AVERAGE_DEPTH_CAP: u32 = 20;
/// Depth cap for per-leaf dumps.
pub const LEAF_DUMP_CAP: u32 = 22;

const QUANTILE_BINS: usize = 4096;

/// One step of the recursion: degraded or upgraded branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Bit 0, the gcd/degraded branch.
    Minus,
    /// Bit 1, the lcm/upgraded branch.
    Plus,
}

/// A finite bit string selecting one virtual channel; most significant bit
/// first, so a path of length n and its integer index i satisfy
/// `i = sum b_k 2^(n-k)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolarPath {
    steps: Vec<Branch>,
}

impl PolarPath {
    pub fn empty() -> Self {
        PolarPath { steps: Vec::new() }
    }

    pub fn from_steps(steps: Vec<Branch>) -> Self {
        PolarPath { steps }
    }

    /// Bits over {0, 1}, most significant first.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let steps = bits
            .iter()
            .map(|&b| match b {
                0 => Ok(Branch::Minus),
                1 => Ok(Branch::Plus),
                other => Err(Error::PathChar(
                    char::from_digit(other as u32, 10).unwrap_or('?'),
                )),
            })
            .collect::<Result<_>>()?;
        Ok(PolarPath { steps })
    }

    /// The path of length `len` whose index is `index`.
    pub fn from_index(index: u64, len: u32) -> Result<Self> {
        if len < 64 && index >= 1u64 << len {
            return Err(Error::PathIndex { index, len });
        }
        let steps = (0..len)
            .map(|k| {
                if (index >> (len - 1 - k)) & 1 == 1 {
                    Branch::Plus
                } else {
                    Branch::Minus
                }
            })
            .collect();
        Ok(PolarPath { steps })
    }

    pub fn steps(&self) -> &[Branch] {
        &self.steps
    }

    pub fn len(&self) -> u32 {
        self.steps.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The index of the addressed channel among the 2^len at this depth.
    pub fn index(&self) -> u64 {
        self.steps.iter().fold(0, |acc, step| {
            (acc << 1) | matches!(step, Branch::Plus) as u64
        })
    }
}

impl FromStr for PolarPath {
    type Err = Error;

    /// Accepts `0`/`-` for the degraded branch and `1`/`+` for the upgraded
    /// one, e.g. `"01"` or `"-+"`.
    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .chars()
            .map(|c| match c {
                '0' | '-' => Ok(Branch::Minus),
                '1' | '+' => Ok(Branch::Plus),
                other => Err(Error::PathChar(other)),
            })
            .collect::<Result<_>>()?;
        Ok(PolarPath { steps })
    }
}

impl fmt::Display for PolarPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            f.write_str(match step {
                Branch::Minus => "0",
                Branch::Plus => "1",
            })?;
        }
        Ok(())
    }
}

impl Gec {
    /// The virtual channel reached by folding the transform along `path`;
    /// the empty path returns the channel itself.
    pub fn virtual_channel(&self, path: &PolarPath) -> Gec {
        let lattice = Arc::clone(self.lattice());
        let mut eps = self.eps().to_vec();
        let mut next = vec![0.0; eps.len()];
        for step in path.steps() {
            match step {
                Branch::Minus => minus_into(&lattice, &eps, &mut next),
                Branch::Plus => plus_into(&lattice, &eps, &mut next),
            }
            std::mem::swap(&mut eps, &mut next);
        }
        Gec::from_raw_parts(lattice, eps)
    }
}

/// Knobs for the full-tree sweeps.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Worker threads; 0 means available parallelism.
    pub threads: usize,
    /// Refuse sweeps deeper than this.
    pub depth_cap: u32,
    /// Collect the quantile summary of leaf capacities.
    pub quantiles: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            threads: 0,
            depth_cap: HISTOGRAM_DEPTH_CAP,
            quantiles: true,
        }
    }
}

/// Mass of one polarization level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMass {
    pub divisor: u64,
    pub ln_divisor: f64,
    pub mass: f64,
}

/// Five-number summary of the leaf capacities (quartiles estimated from a
/// fixed binning of `[0, ln q]`; min and max exact).
#[derive(Debug, Clone, PartialEq)]
pub struct LeafQuantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// How the 2^n leaf capacities distribute over the levels `ln d`.
#[derive(Debug, Clone)]
pub struct LevelHistogram {
    pub depth: u32,
    pub alpha: Alpha,
    /// Classification tolerance in nats.
    pub delta: f64,
    /// One entry per divisor of q, ascending.
    pub levels: Vec<LevelMass>,
    /// Fraction of leaves within `delta` of no level.
    pub unclassified: f64,
    pub leaf_quantiles: Option<LeafQuantiles>,
}

impl LevelHistogram {
    /// Mass recorded at the level of divisor `d`, if `d` divides q.
    pub fn mass_at(&self, d: u64) -> Option<f64> {
        self.levels.iter().find(|l| l.divisor == d).map(|l| l.mass)
    }
}

struct Accumulator {
    counts: Vec<u64>,
    unclassified: u64,
    bins: Vec<u64>,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn new(levels: usize, quantiles: bool) -> Self {
        Accumulator {
            counts: vec![0; levels],
            unclassified: 0,
            bins: if quantiles {
                vec![0; QUANTILE_BINS]
            } else {
                Vec::new()
            },
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.unclassified += other.unclassified;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }
}

/// Classifier from a capacity value to the nearest level index.
struct LevelClassifier<'a> {
    levels: &'a [f64],
    delta: f64,
}

impl LevelClassifier<'_> {
    fn classify(&self, value: f64) -> Option<usize> {
        let idx = self.levels.partition_point(|&l| l < value);
        let mut best: Option<usize> = None;
        let mut best_dist = self.delta;
        if idx < self.levels.len() {
            let dist = (self.levels[idx] - value).abs();
            if dist <= best_dist {
                best = Some(idx);
                best_dist = dist;
            }
        }
        if idx > 0 {
            let dist = (self.levels[idx - 1] - value).abs();
            if dist < best_dist {
                best = Some(idx - 1);
            }
        }
        best
    }
}

fn depth_guard(n: u32, cap: u32) -> Result<()> {
    if n > cap {
        let leaves = if n < 63 {
            format!("2^{n} = {}", 1u128 << n)
        } else {
            format!("2^{n}")
        };
        return Err(Error::DepthExceeded {
            requested: n,
            cap,
            leaves,
        });
    }
    Ok(())
}

/// Depth-first walk of the subtree of depth `levels` rooted at `eps`,
/// reusing one scratch row per level. Leaves are visited in ascending index
/// order, starting from `base_index << levels`.
fn walk_leaves(
    lattice: &DivisorSet,
    eps: &[f64],
    levels: u32,
    base_index: u64,
    scratch: &mut [Vec<f64>],
    visit: &mut impl FnMut(u64, &[f64]),
) {
    if levels == 0 {
        visit(base_index, eps);
        return;
    }
    let (head, tail) = scratch.split_first_mut().expect("scratch sized to depth");
    minus_into(lattice, eps, head);
    walk_leaves(lattice, head, levels - 1, base_index << 1, tail, visit);
    plus_into(lattice, eps, head);
    walk_leaves(
        lattice,
        head,
        levels - 1,
        (base_index << 1) | 1,
        tail,
        visit,
    );
}

fn scratch_rows(len: usize, depth: u32) -> Vec<Vec<f64>> {
    (0..depth).map(|_| vec![0.0; len]).collect()
}

/// Histogram of the 2^n leaf capacities with default options.
pub fn evolve_histogram(v: &Gec, n: u32, alpha: Alpha, delta: f64) -> Result<LevelHistogram> {
    evolve_histogram_with(v, n, alpha, delta, &SweepOptions::default())
}

/// Histogram of the 2^n leaf capacities of order `alpha`, classifying each
/// leaf to the nearest `ln d` within `delta` nats.
pub fn evolve_histogram_with(
    v: &Gec,
    n: u32,
    alpha: Alpha,
    delta: f64,
    opts: &SweepOptions,
) -> Result<LevelHistogram> {
    depth_guard(n, opts.depth_cap)?;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidDelta(delta));
    }
    let lattice = v.lattice();
    let levels = lattice.ln_divisors();
    let classifier = LevelClassifier { levels, delta };
    let evaluator = AlphaEvaluator::new(lattice, alpha);
    let ln_q = levels[levels.len() - 1];
    let bin_scale = if ln_q > 0.0 {
        QUANTILE_BINS as f64 / ln_q
    } else {
        0.0
    };

    let threads = resolve_threads(opts.threads);
    let split = split_levels(n, threads);
    let prefixes = 1u64 << split;

    // Subtree roots, derived sequentially so every leaf value is computed by
    // the exact same kernel sequence regardless of worker count.
    let roots: Vec<Vec<f64>> = (0..prefixes)
        .map(|p| {
            v.virtual_channel(&PolarPath::from_index(p, split).expect("in range"))
                .eps()
                .to_vec()
        })
        .collect();

    let run_subtree = |root: &[f64], prefix: u64, acc: &mut Accumulator| {
        let mut scratch = scratch_rows(root.len(), n - split);
        walk_leaves(
            lattice,
            root,
            n - split,
            prefix,
            &mut scratch,
            &mut |_, eps| {
                let value = evaluator.eval(eps);
                match classifier.classify(value) {
                    Some(level) => acc.counts[level] += 1,
                    None => acc.unclassified += 1,
                }
                if !acc.bins.is_empty() {
                    let bin = ((value * bin_scale) as usize).min(QUANTILE_BINS - 1);
                    acc.bins[bin] += 1;
                }
                acc.min = acc.min.min(value);
                acc.max = acc.max.max(value);
            },
        );
    };

    let mut total = Accumulator::new(levels.len(), opts.quantiles);
    if threads <= 1 || prefixes == 1 {
        for (p, root) in roots.iter().enumerate() {
            run_subtree(root, p as u64, &mut total);
        }
    } else {
        let chunk = roots.len().div_ceil(threads);
        let partials: Vec<Accumulator> = thread::scope(|scope| {
            let handles: Vec<_> = roots
                .chunks(chunk)
                .enumerate()
                .map(|(c, chunk_roots)| {
                    let run = &run_subtree;
                    scope.spawn(move || {
                        let mut acc = Accumulator::new(levels.len(), opts.quantiles);
                        for (i, root) in chunk_roots.iter().enumerate() {
                            run(root, (c * chunk + i) as u64, &mut acc);
                        }
                        acc
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("sweep worker"))
                .collect()
        });
        for part in &partials {
            total.merge(part);
        }
    }

    let leaf_count = (1u128 << n) as f64;
    let level_masses = lattice
        .divisors()
        .iter()
        .zip(levels)
        .zip(&total.counts)
        .map(|((&divisor, &ln_divisor), &count)| LevelMass {
            divisor,
            ln_divisor,
            mass: count as f64 / leaf_count,
        })
        .collect();
    let leaf_quantiles = if opts.quantiles {
        Some(quantiles_from_bins(&total, n, ln_q))
    } else {
        None
    };
    Ok(LevelHistogram {
        depth: n,
        alpha,
        delta,
        levels: level_masses,
        unclassified: total.unclassified as f64 / leaf_count,
        leaf_quantiles,
    })
}

fn quantiles_from_bins(acc: &Accumulator, n: u32, ln_q: f64) -> LeafQuantiles {
    let total = 1u128 << n;
    let width = ln_q / QUANTILE_BINS as f64;
    let mut targets = [total / 4, total / 2, 3 * (total / 4)];
    if total < 4 {
        targets = [0, 0, 0];
    }
    let mut values = [acc.min; 3];
    let mut cumulative: u128 = 0;
    let mut t = 0;
    'outer: for (i, &count) in acc.bins.iter().enumerate() {
        cumulative += count as u128;
        while cumulative > targets[t] {
            values[t] = (i as f64 + 0.5) * width;
            t += 1;
            if t == 3 {
                break 'outer;
            }
        }
    }
    LeafQuantiles {
        min: acc.min,
        q1: values[0],
        median: values[1],
        q3: values[2],
        max: acc.max,
    }
}

fn resolve_threads(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
}

/// Number of top tree levels to expand so that every worker gets whole
/// subtrees.
fn split_levels(n: u32, threads: usize) -> u32 {
    if threads <= 1 {
        return 0;
    }
    let k = usize::BITS - (threads - 1).leading_zeros(); // ceil(log2(threads))
    k.min(n).min(16)
}

/// Exact mean of the order-`alpha` capacity over all 2^n virtual channels at
/// depth n; the default cap is [`AVERAGE_DEPTH_CAP`].
pub fn average_i_alpha(v: &Gec, n: u32, alpha: Alpha) -> Result<f64> {
    average_i_alpha_with_cap(v, n, alpha, AVERAGE_DEPTH_CAP)
}

pub fn average_i_alpha_with_cap(v: &Gec, n: u32, alpha: Alpha, cap: u32) -> Result<f64> {
    depth_guard(n, cap)?;
    let lattice = v.lattice();
    let evaluator = AlphaEvaluator::new(lattice, alpha);
    let mut scratch = scratch_rows(v.eps().len(), n);
    // Pairwise subtree sums keep the accumulation error logarithmic in the
    // leaf count.
    fn subtree_sum(
        lattice: &DivisorSet,
        eps: &[f64],
        levels: u32,
        scratch: &mut [Vec<f64>],
        evaluator: &AlphaEvaluator<'_>,
    ) -> f64 {
        if levels == 0 {
            return evaluator.eval(eps);
        }
        let (head, tail) = scratch.split_first_mut().expect("scratch sized to depth");
        minus_into(lattice, eps, head);
        let low = subtree_sum(lattice, head, levels - 1, tail, evaluator);
        plus_into(lattice, eps, head);
        let high = subtree_sum(lattice, head, levels - 1, tail, evaluator);
        low + high
    }
    let sum = subtree_sum(lattice, v.eps(), n, &mut scratch, &evaluator);
    Ok(sum / (1u128 << n) as f64)
}

/// Streams `(leaf index, capacity)` for all 2^n leaves in ascending index
/// order; the default cap is [`LEAF_DUMP_CAP`].
pub fn visit_leaves(v: &Gec, n: u32, alpha: Alpha, visit: impl FnMut(u64, f64)) -> Result<()> {
    visit_leaves_with_cap(v, n, alpha, LEAF_DUMP_CAP, visit)
}

pub fn visit_leaves_with_cap(
    v: &Gec,
    n: u32,
    alpha: Alpha,
    cap: u32,
    mut visit: impl FnMut(u64, f64),
) -> Result<()> {
    depth_guard(n, cap)?;
    let lattice = v.lattice();
    let evaluator = AlphaEvaluator::new(lattice, alpha);
    let mut scratch = scratch_rows(v.eps().len(), n);
    walk_leaves(lattice, v.eps(), n, 0, &mut scratch, &mut |index, eps| {
        visit(index, evaluator.eval(eps));
    });
    Ok(())
}
