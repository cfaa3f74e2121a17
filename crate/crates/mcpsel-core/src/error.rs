use alloc::string::String;
use core::fmt;

/// Errors shared by all modules. Hypothesis violations carry a human-readable
/// reason naming the failed precondition.
#[derive(Clone, Debug, PartialEq)]
pub enum CoreError {
    /// Matrix dimensions do not match the operation's requirements.
    DimensionMismatch { expected: usize, got: usize },
    /// Input failed the Hermitian symmetry check.
    NotHermitian { deviation: f64 },
    /// Input has an eigenvalue below the PSD tolerance.
    NotPsd { min_eigenvalue: f64 },
    /// A stated theorem hypothesis does not hold for the given input.
    Hypothesis(String),
    /// An enumeration budget (exhaustive search, mixed discriminant dimension
    /// cap, interpolation lattice) would be exceeded.
    BudgetExceeded(String),
    /// Structurally invalid input (empty system, zero polynomial, bad blocks).
    Invalid(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::NotHermitian { deviation } => {
                write!(f, "not Hermitian: symmetry deviation {deviation:e}")
            }
            CoreError::NotPsd { min_eigenvalue } => {
                write!(f, "not positive semidefinite: min eigenvalue {min_eigenvalue:e}")
            }
            CoreError::Hypothesis(why) => write!(f, "hypothesis violation: {why}"),
            CoreError::BudgetExceeded(what) => write!(f, "budget exceeded: {what}"),
            CoreError::Invalid(what) => write!(f, "invalid input: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
