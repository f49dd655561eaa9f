use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing series: {0}")]
    MissingSeries(String),
    #[error("unparseable date {0:?}")]
    UnparseableDate(String),
    #[error("ragged panel: {0}")]
    RaggedPanel(String),
    #[error("non-positive value {value} in series {series} (log transform)")]
    NonPositiveValue { series: String, value: f64 },
    #[error("series {0} has zero sample variance")]
    ConstantSeries(String),
    #[error("forecast origin out of range: {0}")]
    OriginOutOfRange(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("non-stationary parameters: {0}")]
    NonStationaryParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite density: {0}")]
    NonFiniteDensity(String),
    #[error("singular innovation covariance at t={0}")]
    SingularInnovationCovariance(usize),
    #[error("dense oracle size guard exceeded: {0} > 512")]
    SizeGuardExceeded(usize),
    #[error("singular covariance: {0}")]
    SingularCovariance(String),
    #[error("posterior covariance not positive definite: {0}")]
    NonPositiveDefinitePosteriorCov(String),
    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),
    #[error("degenerate proposal: {0}")]
    DegenerateProposal(String),
    #[error("shrinkage parameters must be positive (pi1={pi1}, pi2={pi2})")]
    NonPositiveShrinkage { pi1: f64, pi2: f64 },
    #[error("singular design matrix: {0}")]
    SingularDesign(String),
    #[error("trace too short: {len} < {min}")]
    TooShortTrace { len: usize, min: usize },
    #[error("degenerate trace (zero variance)")]
    DegenerateTrace,
    #[error("empty trace")]
    EmptyTrace,
    #[error("no posterior draws")]
    NoDraws,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("benchmark loss must be positive, got {0}")]
    ZeroBenchmark(f64),
    #[error("loss differential has zero variance")]
    DegenerateDifferential,
    #[error("model confidence set needs at least two models, got {0}")]
    InsufficientModels(usize),
    #[error("chain stopped after iteration {0} as requested")]
    Interrupted(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("chain failed at iteration {iteration}: {source}")]
    Chain {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures rooted in numerical trouble rather than bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Chain { source, .. } => source.is_numeric(),
            Error::NonFiniteDensity(_)
            | Error::SingularInnovationCovariance(_)
            | Error::SingularCovariance(_)
            | Error::NonPositiveDefinitePosteriorCov(_)
            | Error::NumericalOverflow(_)
            | Error::DegenerateProposal(_)
            | Error::SingularDesign(_)
            | Error::DegenerateTrace
            | Error::DegenerateDifferential => true,
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}
