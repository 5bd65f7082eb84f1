use thiserror::Error;

/// Errors raised by estimation, hypothesis construction, the test engines and
/// the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("correlation vectorization needs d ≥ 2")]
    CorrelationDimension,

    #[error("length {len} is not a valid half-vectorization length for the {kind} kind")]
    InvalidHalfVecLength { len: usize, kind: &'static str },

    #[error("matrix not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("group {group} has {n} observations, at least 2 are required")]
    TooFewObservations { group: usize, n: usize },

    #[error("degenerate component: variable {variable} of group {group} has zero sample variance")]
    DegenerateComponent { group: usize, variable: usize },

    #[error("nonpositive variance {value:.3e} at diagonal position {index}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("hypothesis covariance degenerate: tr(C·Σ·Cᵀ) = {trace:.3e}")]
    DegenerateHypothesis { trace: f64 },

    #[error("transformation undefined at this point: {0}")]
    Domain(String),

    #[error("invalid hypothesis: {0}")]
    Hypothesis(String),

    #[error("Taylor method is correlation-only")]
    TaylorOnCovariance,

    #[error("combined test is only defined for a=2 groups (got {0})")]
    CombinedGroupCount(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error at row {row}, column {column}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Broad failure class, used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::Hypothesis(_)
            | Error::InvalidArgument(_)
            | Error::TaylorOnCovariance
            | Error::CombinedGroupCount(_)
            | Error::ThreadPool(_) => ErrorKind::Config,
            Error::Cell { .. }
            | Error::Data(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::TooFewObservations { .. }
            | Error::DegenerateComponent { .. }
            | Error::CorrelationDimension => ErrorKind::Data,
            Error::Dimension(_)
            | Error::InvalidHalfVecLength { .. }
            | Error::NotPositiveSemidefinite { .. }
            | Error::NonPositiveVariance { .. }
            | Error::DegenerateHypothesis { .. }
            | Error::Domain(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
