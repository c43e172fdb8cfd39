use thiserror::Error;

/// Errors produced by channel construction, transforms, sweeps, and the
/// certification oracle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input alphabet size must be at least 2, got q={0}")]
    AlphabetTooSmall(u64),
    #[error("q={q} exceeds the factorization limit of {limit}")]
    AlphabetTooLarge { q: u64, limit: u64 },
    #[error("{value} is not a divisor of q={q}")]
    NotADivisor { value: u64, q: u64 },
    #[error("missing probability entry for divisor {0}")]
    MissingDivisor(u64),
    #[error("duplicate probability entry for divisor {0}")]
    DuplicateDivisor(u64),
    #[error(
        "probability for divisor {divisor} is {value}; entries must be finite and nonnegative"
    )]
    BadProbability { divisor: u64, value: f64 },
    #[error("probabilities sum to {0}, more than 1e-9 away from 1")]
    ProbabilitySum(f64),
    #[error("erasure probability {0} is outside [0, 1]")]
    ErasureOutOfRange(f64),
    #[error("gamma={gamma} is out of range for q={q}")]
    GammaOutOfRange { gamma: u64, q: u64 },
    #[error(
        "gamma={gamma} is not a unit modulo q={q}: the combining kernel needs gcd(gamma, q) = 1"
    )]
    GammaNotUnit { gamma: u64, q: u64 },
    #[error("q={0} is not a prime power")]
    NotPrimePower(u64),
    #[error("rho must be greater than -1, got {0}")]
    RhoOutOfRange(f64),
    #[error("alpha must be a nonnegative real or infinity, got {0}")]
    InvalidAlpha(f64),
    #[error("cannot parse {0:?} as an alpha order")]
    AlphaParse(String),
    #[error("classification tolerance must be positive, got {0}")]
    InvalidDelta(f64),
    #[error(
        "depth {requested} exceeds the cap of {cap}: a full sweep would visit {leaves} leaves"
    )]
    DepthExceeded {
        requested: u32,
        cap: u32,
        leaves: String,
    },
    #[error("oracle depth {requested} exceeds the cap of {cap}")]
    OracleDepth { requested: u32, cap: u32 },
    #[error("q={q} exceeds the oracle cap of {cap}: raw output alphabets grow too fast beyond it")]
    OracleAlphabetTooLarge { q: u64, cap: u64 },
    #[error("invalid path character {0:?}; expected one of 0, 1, -, +")]
    PathChar(char),
    #[error("path index {index} does not fit in {len} bits")]
    PathIndex { index: u64, len: u32 },
    #[error("transition matrix row {row} sums to {sum}, outside the 1e-12 tolerance")]
    RowSum { row: usize, sum: f64 },
    #[error(
        "transition matrix entry ({row}, {col}) is {value}; entries must be finite and nonnegative"
    )]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("duplicate output label {0}")]
    DuplicateLabel(String),
    #[error("transition matrix has {len} entries, expected {rows} rows x {cols} outputs")]
    MatrixShape {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("channel file: {0}")]
    ChannelFile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("process needs at least one step and one trial")]
    EmptyProcess,
}

pub type Result<T> = std::result::Result<T, Error>;
