use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("problem size {entries} exceeds the cap of {cap} cost entries")]
    SizeCapExceeded { entries: usize, cap: usize },

    #[error("transport solver lost feasibility (marginal residual {residual:e})")]
    InfeasibleNumerics { residual: f64 },

    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),

    #[error("atom at {atom} splits across target quantile breakpoints; the optimal coupling is not a map")]
    AtomSplit { atom: f64 },

    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NonPsd { min_eigenvalue: f64 },

    #[error("covariance is singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularCovariance { min_eigenvalue: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("kernel bandwidth must be positive, got {0}")]
    BadBandwidth(f64),

    #[error("support point outside the unit cube: {0:?}")]
    SupportOutOfRange(Vec<f64>),

    #[error("Fourier coefficient sets use different truncations ({0} vs {1})")]
    MismatchedTruncation(f64, f64),

    #[error("entropy term has no particle velocity; use the Langevin step for sigma^2 > 0")]
    EntropyNotSupported,

    #[error("step size halved {halvings} times without keeping weights positive")]
    StepCollapse { halvings: usize },

    #[error("covariance clamping fired on {clamped} of {steps} steps; reduce dt")]
    PsdLost { clamped: usize, steps: usize },

    #[error("optimal plan from the base measure to input {index} is not a map")]
    NotAMap { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::Invariant(_) => "InvariantError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SizeCapExceeded { .. } => "SizeCapExceeded",
            Error::InfeasibleNumerics { .. } => "InfeasibleNumerics",
            Error::UnsupportedInstance(_) => "UnsupportedInstance",
            Error::AtomSplit { .. } => "AtomSplit",
            Error::NonPsd { .. } => "NonPSD",
            Error::SingularCovariance { .. } => "SingularCovariance",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::BadBandwidth(_) => "BadBandwidth",
            Error::SupportOutOfRange(_) => "SupportOutOfRange",
            Error::MismatchedTruncation(..) => "MismatchedTruncation",
            Error::EntropyNotSupported => "EntropyNotSupported",
            Error::StepCollapse { .. } => "StepCollapse",
            Error::PsdLost { .. } => "PSDLost",
            Error::NotAMap { .. } => "NotAMap",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
