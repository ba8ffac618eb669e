use core::fmt;

/// Errors raised by the numerical core.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A Lie-derivative order above the configured maximum was requested.
    OrderOverflow { order: usize, max: usize },
    /// A NaN or infinity appeared while evaluating the system.
    NonFiniteEvaluation,
    /// An output has no defined relative degree at the evaluation point.
    UndefinedRelativeDegree { output: usize },
    /// Only square interaction matrices (p = m) are supported.
    NonSquare { outputs: usize, inputs: usize },
    /// Deck/choice size limits were exceeded.
    SizeOverflow { q: usize, p: usize },
    /// Invalid arguments to a constructor or operation.
    InvalidArgument(&'static str),
    /// Interaction matrix condition number at or above the configured limit.
    SingularInteraction { cond: f64 },
    /// Vector lengths do not agree.
    DimensionMismatch { expected: usize, found: usize },
    /// A gain row does not define a Hurwitz polynomial.
    NotHurwitz { output: usize },
    /// Global constants requested for an empty meld set.
    EmptyMeldSet,
    /// Dwell-time formulas require a strictly positive tolerance.
    NonpositiveEpsilon,
    /// Newton inversion of a coordinate map did not converge.
    InversionFailure { iterations: usize, residual: f64 },
    /// Too many sample points could not be inverted during constant estimation.
    EstimationFailure { failures: usize, samples: usize },
    /// The integrated state became non-finite.
    NonFiniteState { t: f64 },
    /// Index outside the valid range.
    IndexOutOfRange { index: usize, len: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OrderOverflow { order, max } => {
                write!(f, "Lie derivative order {order} exceeds maximum {max}")
            }
            Self::NonFiniteEvaluation => write!(f, "non-finite value during evaluation"),
            Self::UndefinedRelativeDegree { output } => {
                write!(f, "relative degree of output {} is undefined", output + 1)
            }
            Self::NonSquare { outputs, inputs } => write!(
                f,
                "only square interaction matrices are supported ({outputs} outputs, {inputs} inputs)"
            ),
            Self::SizeOverflow { q, p } => write!(f, "choice enumeration too large (q={q}, p={p})"),
            Self::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Self::SingularInteraction { cond } => {
                write!(f, "interaction matrix is singular (condition number {cond:e})")
            }
            Self::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Self::NotHurwitz { output } => {
                write!(f, "gain row of output {} is not Hurwitz", output + 1)
            }
            Self::EmptyMeldSet => write!(f, "empty meld set"),
            Self::NonpositiveEpsilon => write!(f, "epsilon must be strictly positive"),
            Self::InversionFailure { iterations, residual } => write!(
                f,
                "Newton inversion failed after {iterations} iterations (residual {residual:e})"
            ),
            Self::EstimationFailure { failures, samples } => write!(
                f,
                "constant estimation failed: {failures} of {samples} samples could not be inverted"
            ),
            Self::NonFiniteState { t } => write!(f, "state became non-finite at t = {t}"),
            Self::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
