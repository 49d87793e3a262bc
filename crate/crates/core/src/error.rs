use thiserror::Error;

/// Every failure the estimators and the I/O layer can report.
///
/// Numerical breakdowns are ordinary values of this type: the Monte Carlo
/// and bootstrap drivers count them instead of aborting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("logistic fit did not converge after {iterations} iterations ({reason})")]
    NonConvergence { iterations: usize, reason: String },
    #[error("IRLS information matrix is singular")]
    SingularInformation,
    #[error("outcome design is rank deficient within arm {arm} (rank {rank} < {cols})")]
    RankDeficient { arm: u8, rank: usize, cols: usize },
    #[error("arm {arm} has {n} units, needs more than {cols}")]
    ArmTooSmall { arm: u8, n: usize, cols: usize },
    #[error("positivity violated at unit {unit}: fitted propensity {value}")]
    PositivityViolation { unit: usize, value: f64 },
    #[error("treatment arm {arm} is empty")]
    EmptyArm { arm: u8 },
    #[error("sandwich matrix A is singular (condition estimate {condition:e})")]
    SingularA { condition: f64 },
    #[error("estimated variance is negative ({variance:e})")]
    NegativeVariance { variance: f64 },
    #[error("bootstrap draws are degenerate: {0}")]
    DegenerateDraws(String),
    #[error("{failures} of {requested} bootstrap replicates failed")]
    TooManyFailures { failures: usize, requested: usize },
    #[error("covariate `{0}` has zero pooled standard deviation")]
    ZeroPooledSd(String),
    #[error("parse error at line {line}, column `{column}`: {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },
    #[error("treatment value `{value}` at line {line} is not 0 or 1")]
    NonBinaryTreatment { line: usize, value: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in report files.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonConvergence { .. } => "NonConvergence",
            Error::SingularInformation => "SingularInformation",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::ArmTooSmall { .. } => "ArmTooSmall",
            Error::PositivityViolation { .. } => "PositivityViolation",
            Error::EmptyArm { .. } => "EmptyArm",
            Error::SingularA { .. } => "SingularA",
            Error::NegativeVariance { .. } => "NegativeVariance",
            Error::DegenerateDraws(_) => "DegenerateDraws",
            Error::TooManyFailures { .. } => "TooManyFailures",
            Error::ZeroPooledSd(_) => "ZeroPooledSD",
            Error::Parse { .. } => "ParseError",
            Error::NonBinaryTreatment { .. } => "NonBinaryTreatment",
            Error::MissingColumn(_) => "MissingColumn",
            Error::Unsupported(_) => "Unsupported",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
