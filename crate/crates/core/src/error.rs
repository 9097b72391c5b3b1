use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("pole of the gamma function at {0}")]
    Pole(String),

    #[error("diffusion coefficient vanishes or is not finite at x = {0}")]
    Singularity(f64),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("path length mismatch: expected {expected}, got {actual}")]
    PathLength { expected: usize, actual: usize },

    #[error("series is empty")]
    EmptySeries,

    #[error("sample too small: {0}")]
    TooSmall(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("non-positive mass {0}")]
    NonPositiveMass(f64),

    #[error("unstable regression function: {0}")]
    Unstable(String),

    #[error("every grid point is masked (|denominator| below {0})")]
    AllMasked(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid input data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable kind, used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Pole(_) => "pole",
            Error::Singularity(_) => "singularity",
            Error::Numeric(_) => "numeric",
            Error::PathLength { .. } => "path-length",
            Error::EmptySeries => "empty-series",
            Error::TooSmall(_) => "too-small",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::NonPositiveMass(_) => "non-positive-mass",
            Error::Unstable(_) => "unstable",
            Error::AllMasked(_) => "all-masked",
            Error::Config(_) => "config",
            Error::UnknownEstimator(_) => "unknown-estimator",
            Error::UnknownModel(_) => "unknown-model",
            Error::Data(_) => "data",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
