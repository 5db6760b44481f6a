use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coalition bitmask {mask:#x} has members outside 0..{n}")]
    InvalidCoalition { mask: u64, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} supports n <= {max}, got {n}")]
    Capacity {
        what: &'static str,
        max: usize,
        n: usize,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("external utility failed on request `{request}`: {reason}")]
    ExternalUtility { request: String, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("cardinality {cardinality} has zero probability under the proposal")]
    ZeroProbability { cardinality: usize },

    #[error("player {player} has no samples in any cardinality stratum")]
    InsufficientData { player: usize },

    #[error("fidelity score needs at least two samples, player {player} has {samples}")]
    InsufficientSamples { player: usize, samples: u64 },

    #[error("non-finite weighted sample {value} for player {player} at step {step}")]
    Numeric {
        player: usize,
        step: u64,
        value: f64,
    },

    #[error("degenerate fairness bound: denominator {denominator:e} is too close to zero")]
    DegenerateBound { denominator: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for this error: 2 configuration or format,
    /// 3 capacity, 4 external utility, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format(_) | Error::Io { .. } => 2,
            Error::Capacity { .. } => 3,
            Error::ExternalUtility { .. } => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
