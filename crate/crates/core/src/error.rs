use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("matrix is numerically singular (pivot {pivot:e} below threshold {threshold:e})")]
    Singular { pivot: f64, threshold: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("quantile path is not finite at t={t}")]
    NonFinitePath { t: usize },

    #[error("indirect GARCH radicand is negative at t={t}")]
    NegativeRadicand { t: usize },

    #[error("division by zero in gradient recursion at t={t}")]
    DivisionByZero { t: usize },

    #[error("operation not supported for this model family: {0}")]
    UnsupportedFamily(String),

    #[error("simulation exploded at t={t} (|y| = {value:e})")]
    Explosion { t: usize, value: f64 },

    #[error("zero polynomial has no well-defined roots")]
    ZeroPolynomial,

    #[error("unsupported DGP form for the linear stability conditions: {0}")]
    UnsupportedForm(String),

    #[error("every trial objective was infinite; widen or move the bounds box")]
    AllTrialsInvalid,

    #[error("series too short: need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },

    #[error("bandwidth rule left (0,1): tau +/- m = {lo} .. {hi}")]
    BandwidthDomain { lo: f64, hi: f64 },

    #[error("degenerate gradient at t={t}: quadratic form vanishes at a nonzero residual")]
    DegenerateGradient { t: usize },

    #[error("D-hat is singular at V_d iteration {iteration}")]
    SingularD { iteration: usize },

    #[error("nonpositive variance for parameter {index}")]
    NonpositiveVariance { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by numerics rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Domain(_)
                | Error::EmptyInput(_)
                | Error::Dimension(_)
                | Error::UnsupportedFamily(_)
                | Error::UnsupportedForm(_)
                | Error::TooShort { .. }
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
