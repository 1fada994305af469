use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("curves are defined on different grids")]
    GridMismatch,

    #[error("sample contains no curves")]
    EmptySample,

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max |C - C^T| = {0:e})")]
    NonSymmetric(f64),

    #[error("Jacobi iteration did not converge after {0} sweeps")]
    NotConverged(usize),

    #[error("eigenvalue {0:e} is negative beyond rounding; covariance is broken")]
    NegativeEigenvalue(f64),

    #[error("truncation level {d} out of range (1..={max})")]
    DimensionOutOfRange { d: usize, max: usize },

    #[error("all eigenvalues are zero")]
    ZeroSpectrum,

    #[error("FEV threshold {threshold} unreachable; maximum attainable FEV is {max_fev}")]
    FevUnreachable { threshold: f64, max_fev: f64 },

    #[error("no k <= {scanned} satisfies k * tail(k) <= eps^(2+delta) = {target:e}; supply a longer sequence or a larger eps")]
    NoDimensionProp1 { scanned: usize, target: f64 },

    #[error("no admissible d: eps^2 = {eps2:e} is outside [b(k), B(k)] for every k <= {}; bounds scanned: {bounds:?}", bounds.len())]
    NoAdmissibleDimension { eps2: f64, bounds: Vec<(f64, f64)> },

    #[error("volume factor is only defined for super-exponential or exponential decay; use ball_volume for {0}")]
    WrongDecayClass(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed CSV at line {line}: {msg}")]
    Csv { line: u64, msg: String },

    #[error("replication {index} failed: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
