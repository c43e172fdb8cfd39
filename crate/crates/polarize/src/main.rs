//! Command-line front end for generalized erasure channels.
//!
//! Channels are JSON files of the form
//! `{"q": 27, "eps": {"1": 0.1, "3": 0.2, "9": 0.3, "27": 0.4}}`.
//! All numeric output is in nats (a presentation-level `--bits` flag exists
//! where capacities are printed) at full double precision, so downstream
//! plots regenerate exactly. Every command is deterministic given its flags
//! and seed.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 certification failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use gec::capacity::ALPHA_GRID;
use gec::martingale::{limit_distribution, ProcessConfig};
use gec::oracle::{certify, CertifyReport};
use gec::tree::{self, Branch, PolarPath, SweepOptions};
use gec::{Alpha, Gec};

/// Certification reports beyond this deviation flip the exit code to 4.
const CERTIFY_DEVIATION_LIMIT: f64 = 1e-9;
/// Cap on `transform --steps` (the command prints every leaf).
const TRANSFORM_STEPS_CAP: u32 = 12;

#[derive(Parser)]
#[command(
    name = "polarize",
    version,
    about = "Polar transforms, capacities, and polarization sweeps for generalized erasure channels"
)]
struct Cli {
    /// Worker threads (default: POLARIZE_THREADS or available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the polar transform along a path, or expand every channel at a
    /// given depth.
    Transform(TransformArgs),
    /// Level histogram of the 2^n virtual-channel capacities.
    Histogram(HistogramArgs),
    /// Mean capacity of order alpha over all virtual channels, per depth.
    AlphaSweep(AlphaSweepArgs),
    /// Verify the transform recursion against raw matrix transforms.
    Certify(CertifyArgs),
    /// Monte-Carlo simulation of the polarization limit.
    Martingale(MartingaleArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("target").required(true).args(["path", "steps"])))]
struct TransformArgs {
    /// Channel JSON file.
    channel: PathBuf,
    /// Transform path: 0/- for the degraded branch, 1/+ for the upgraded.
    #[arg(long)]
    path: Option<String>,
    /// Expand all 2^N virtual channels at depth N instead.
    #[arg(long)]
    steps: Option<u32>,
    /// Use the prime-power fast recursion; fails on composite q.
    #[arg(long)]
    fast_pp: bool,
    /// Comma-separated capacity orders to report.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<String>>,
    /// Print capacities in bits instead of nats.
    #[arg(long)]
    bits: bool,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HistogramArgs {
    channel: PathBuf,
    /// Sweep depth (2^n leaves).
    #[arg(long)]
    n: u32,
    /// Capacity order to classify.
    #[arg(long, default_value = "1")]
    alpha: String,
    /// Classification tolerance around each ln d, in nats.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Write the histogram CSV to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every (index, i_alpha) pair, sorted by i_alpha, to a CSV.
    #[arg(long)]
    dump_leaves: Option<PathBuf>,
}

#[derive(Args)]
struct AlphaSweepArgs {
    channel: PathBuf,
    /// Depths to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "0,2,8")]
    n_list: Vec<u32>,
    /// Comma-separated capacity orders.
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("kernel").args(["gamma", "gamma_all"])))]
struct CertifyArgs {
    channel: PathBuf,
    /// Kernel multiplier to test (default 1).
    #[arg(long)]
    gamma: Option<u64>,
    /// Test every unit multiplier.
    #[arg(long)]
    gamma_all: bool,
    /// Check all paths of length up to this depth.
    #[arg(long, default_value_t = 2)]
    depth: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MartingaleArgs {
    channel: PathBuf,
    /// Transform steps per trajectory.
    #[arg(long, default_value_t = 40)]
    n: u32,
    /// Number of trajectories.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Convergence threshold on the dominant eps entry.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    fn certification(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<gec::Error> for Failure {
    fn from(err: gec::Error) -> Self {
        Failure::validation(err.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure::validation(err.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Failure::validation(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = resolve_threads(cli.threads);
    match run(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("polarize: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("POLARIZE_THREADS")
            .ok()
            .and_then(|value| value.parse().ok())
    })
    .filter(|&t| t > 0)
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn run(command: Command, threads: usize) -> Result<(), Failure> {
    // Parallel Monte-Carlo trials go through the global rayon pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    match command {
        Command::Transform(args) => cmd_transform(args),
        Command::Histogram(args) => cmd_histogram(args, threads),
        Command::AlphaSweep(args) => cmd_alpha_sweep(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Martingale(args) => cmd_martingale(args),
    }
}

fn load_channel(path: &PathBuf) -> Result<Gec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|err| Failure::validation(format!("{}: {err}", path.display())))?;
    Ok(Gec::from_json_str(&text)?)
}

fn parse_alpha_grid(grid: &Option<Vec<String>>) -> Result<Vec<Alpha>, Failure> {
    match grid {
        None => Ok(ALPHA_GRID.to_vec()),
        Some(tokens) => tokens
            .iter()
            .map(|token| token.parse::<Alpha>().map_err(Failure::from))
            .collect(),
    }
}

fn emit(out: &Option<PathBuf>, payload: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, payload)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(payload.as_bytes())?;
        }
    }
    Ok(())
}

fn alpha_map(v: &Gec, grid: &[Alpha], bits: bool) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    let scale = if bits { 1.0 / 2f64.ln() } else { 1.0 };
    for &a in grid {
        map.insert(a.to_string(), serde_json::json!(v.i_alpha(a) * scale));
    }
    serde_json::Value::Object(map)
}

fn cmd_transform(args: TransformArgs) -> Result<(), Failure> {
    let v = load_channel(&args.channel)?;
    let grid = parse_alpha_grid(&args.alpha_grid)?;
    let units = if args.bits { "bits" } else { "nats" };

    // virtual_channel already dispatches to the chain recursion on prime
    // powers; --fast-pp just insists on it.
    let descend = |start: &Gec, path: &PolarPath| -> Result<Gec, Failure> {
        if args.fast_pp {
            let mut current = start.clone();
            for step in path.steps() {
                current = match step {
                    Branch::Minus => current.polar_minus_prime_power()?,
                    Branch::Plus => current.polar_plus_prime_power()?,
                };
            }
            Ok(current)
        } else {
            Ok(start.virtual_channel(path))
        }
    };

    let value = if let Some(path_text) = &args.path {
        let path: PolarPath = path_text.parse::<PolarPath>().map_err(Failure::from)?;
        let leaf = descend(&v, &path)?;
        let mut object = leaf.to_json_value();
        let map = object.as_object_mut().expect("channel value is an object");
        map.insert("path".into(), serde_json::json!(path.to_string()));
        map.insert("units".into(), serde_json::json!(units));
        map.insert("i_alpha".into(), alpha_map(&leaf, &grid, args.bits));
        object
    } else {
        let depth = args.steps.expect("clap group guarantees one of path/steps");
        if depth > TRANSFORM_STEPS_CAP {
            return Err(Failure::validation(format!(
                "--steps {depth} exceeds the cap of {TRANSFORM_STEPS_CAP} (the command prints all 2^n rows)"
            )));
        }
        let mut leaves = Vec::with_capacity(1 << depth);
        for index in 0..(1u64 << depth) {
            let path = PolarPath::from_index(index, depth).map_err(Failure::from)?;
            let leaf = descend(&v, &path)?;
            leaves.push(serde_json::json!({
                "index": index,
                "path": path.to_string(),
                "eps": leaf.to_json_value()["eps"],
                "i_alpha": alpha_map(&leaf, &grid, args.bits),
            }));
        }
        serde_json::json!({
            "q": v.q(),
            "depth": depth,
            "units": units,
            "leaves": leaves,
        })
    };
    emit(
        &args.out,
        &format!("{}\n", serde_json::to_string_pretty(&value)?),
    )
}

fn cmd_histogram(args: HistogramArgs, threads: usize) -> Result<(), Failure> {
    let v = load_channel(&args.channel)?;
    let alpha: Alpha = args.alpha.parse()?;
    let opts = SweepOptions {
        threads,
        ..SweepOptions::default()
    };
    let hist = tree::evolve_histogram_with(&v, args.n, alpha, args.delta, &opts)?;

    let mut csv = String::from("# format=1\nlevel_d,ln_d,mass\n");
    for level in &hist.levels {
        csv.push_str(&format!(
            "{},{},{}\n",
            level.divisor, level.ln_divisor, level.mass
        ));
    }
    csv.push_str(&format!("unclassified,,{}\n", hist.unclassified));
    emit(&args.out, &csv)?;

    if let Some(dump_path) = &args.dump_leaves {
        let mut leaves: Vec<(u64, f64)> = Vec::new();
        tree::visit_leaves(&v, args.n, alpha, |index, value| {
            leaves.push((index, value))
        })?;
        leaves.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut csv = String::from("# format=1\nindex,i_alpha\n");
        for (index, value) in leaves {
            csv.push_str(&format!("{index},{value}\n"));
        }
        fs::write(dump_path, csv)?;
    }
    Ok(())
}

fn cmd_alpha_sweep(args: AlphaSweepArgs) -> Result<(), Failure> {
    let v = load_channel(&args.channel)?;
    let grid = parse_alpha_grid(&args.alpha_grid)?;
    let mut csv = String::from("# format=1\nalpha,n,mean_i_alpha\n");
    for &alpha in &grid {
        for &n in &args.n_list {
            let mean = tree::average_i_alpha(&v, n, alpha)?;
            csv.push_str(&format!("{alpha},{n},{mean}\n"));
        }
    }
    emit(&args.out, &csv)
}

fn cmd_certify(args: CertifyArgs) -> Result<(), Failure> {
    let v = load_channel(&args.channel)?;
    let gammas: Vec<u64> = if args.gamma_all {
        gec::divisors::units(v.q())?
    } else {
        vec![args.gamma.unwrap_or(1)]
    };
    let reports: Vec<CertifyReport> = gammas
        .iter()
        .map(|&gamma| certify(&v, gamma, args.depth))
        .collect::<gec::Result<_>>()?;
    let payload = if args.gamma_all {
        serde_json::to_string_pretty(&reports)?
    } else {
        serde_json::to_string_pretty(&reports[0])?
    };
    emit(&args.out, &format!("{payload}\n"))?;
    let worst = reports
        .iter()
        .map(|r| r.max_struct_dev.max(r.max_ialpha_dev))
        .fold(0.0, f64::max);
    if worst > CERTIFY_DEVIATION_LIMIT {
        return Err(Failure::certification(format!(
            "certification failed: worst deviation {worst:e} exceeds {CERTIFY_DEVIATION_LIMIT:e}"
        )));
    }
    Ok(())
}

fn cmd_martingale(args: MartingaleArgs) -> Result<(), Failure> {
    let v = load_channel(&args.channel)?;
    let mut config = ProcessConfig::new(v, args.n, args.trials, args.seed);
    config.convergence_delta = args.delta;
    let report = limit_distribution(&config)?;
    emit(
        &args.out,
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )
}
