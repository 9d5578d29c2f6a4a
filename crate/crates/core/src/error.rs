use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One violated invariant of a candidate density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityViolation {
    NotSquare { rows: usize, cols: usize },
    NonHermitian { residual: f64 },
    TraceNotOne { trace: f64 },
    NotPsd { min_eigenvalue: f64 },
}

impl std::fmt::Display for DensityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NotSquare { rows, cols } => write!(f, "not square ({rows}x{cols})"),
            Self::NonHermitian { residual } => {
                write!(f, "not Hermitian (max |H - H^dagger| = {residual:.3e})")
            }
            Self::TraceNotOne { trace } => write!(f, "trace {trace} != 1"),
            Self::NotPsd { min_eigenvalue } => {
                write!(
                    f,
                    "not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})"
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max asymmetry {residual:.3e}")]
    NonHermitian { residual: f64 },

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("{algorithm} did not converge within {sweeps} sweeps")]
    NoConvergence {
        algorithm: &'static str,
        sweeps: usize,
    },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("invalid density matrix: {}", join(violations))]
    InvalidDensity { violations: Vec<DensityViolation> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix {index} is not unitary: residual {residual:.3e}")]
    NotUnitary { index: usize, residual: f64 },

    #[error("block partition mismatch: {0}")]
    PartitionMismatch(String),

    #[error("invalid priors: {0}")]
    InvalidPriors(String),

    #[error("canonical pair has no overlapping component (t = 0)")]
    EmptyReduction,

    #[error("overlap f = {f} exceeds sqrt(r*s) = {limit}")]
    InvalidOverlap { f: f64, limit: f64 },

    #[error("invalid angles: need 0 < cos(theta1) <= cos(theta2) < 1, got ({cos1}, {cos2})")]
    InvalidAngles { cos1: f64, cos2: f64 },

    #[error("certification failed: {}", join(.0))]
    CertificationFailed(Vec<String>),

    #[error("infeasible pair: {0}")]
    InfeasiblePair(String),

    #[error("POVM completeness violated: residual {residual:.3e}")]
    CompletenessViolation { residual: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
