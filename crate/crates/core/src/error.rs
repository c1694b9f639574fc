use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is singular (pivot {pivot} underflowed)")]
    SingularMatrix { pivot: usize },

    #[error("eigenvalue {eigenvalue} lies within {tolerance:e} of the Fermi level {mu}")]
    DegenerateFermiLevel {
        eigenvalue: f64,
        mu: f64,
        tolerance: f64,
    },

    #[error("density matrix spectrum [{min}, {max}] lies outside [0, 1]")]
    SpectrumOutOfRange { min: f64, max: f64 },

    #[error("single-particle dimension {dim} exceeds the Fock-space limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("charge observable does not have integer spectrum (eigenvalue {eigenvalue})")]
    NonIntegerSpectrum { eigenvalue: f64 },

    #[error("charge and state do not commute: max |[Q, rho]| = {deviation:e}")]
    NonCommutingState { deviation: f64 },

    #[error("phase unwrapping failed near lambda = {lambda}: {reason}; use a finer grid")]
    UnwrapFailure { lambda: f64, reason: String },

    #[error(
        "Richardson extrapolation for order {order} did not converge (error estimate {estimate:e})"
    )]
    StepUnderflow { order: usize, estimate: f64 },

    #[error("partition order {k} exceeds the maximum {max}")]
    KTooLarge { k: usize, max: usize },

    #[error("no momentum grid point in the bias window ({lower}, {upper}]")]
    EmptyWindow { lower: f64, upper: f64 },

    #[error("cutoff {cutoff} is smaller than the required {required}")]
    CutoffTooSmall { cutoff: f64, required: f64 },

    #[error("unknown kind `{0}`")]
    UnknownKind(String),

    #[error("grid of {size} points is too coarse: at least {required} are required")]
    GridTooCoarse { size: usize, required: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Variant name, used in machine-readable error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "NotSquare",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite => "NonFinite",
            Error::NotHermitian { .. } => "NotHermitian",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::DegenerateFermiLevel { .. } => "DegenerateFermiLevel",
            Error::SpectrumOutOfRange { .. } => "SpectrumOutOfRange",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::NonIntegerSpectrum { .. } => "NonIntegerSpectrum",
            Error::NonCommutingState { .. } => "NonCommutingState",
            Error::UnwrapFailure { .. } => "UnwrapFailure",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::EmptyWindow { .. } => "EmptyWindow",
            Error::CutoffTooSmall { .. } => "CutoffTooSmall",
            Error::UnknownKind(_) => "UnknownKind",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::InvalidParameter { .. } => "InvalidParameter",
        }
    }

    /// True for failures caused by numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnwrapFailure { .. }
                | Error::StepUnderflow { .. }
                | Error::SingularMatrix { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
