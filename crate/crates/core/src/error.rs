use thiserror::Error;

/// Errors produced by the lattice laboratory.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid dimension {0}: must be 1, 2 or 3")]
    InvalidDimension(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("misaligned grids: {0}")]
    Misalignment(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("mollifier scale {epsilon} unresolvable on spacing {spacing} (need epsilon >= 2*spacing)")]
    UnresolvableMollifier { epsilon: f64, spacing: f64 },

    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),

    #[error("renormalisation order {order} requires dimension {required}, got dimension {dim}")]
    OrderDimensionMismatch {
        order: &'static str,
        required: usize,
        dim: usize,
    },

    #[error("eigensolver did not converge within {max_iter} matrix applications; best residuals {residuals:?}")]
    NotConverged {
        max_iter: usize,
        residuals: Vec<f64>,
    },

    #[error("eigenvalue {index} is numerically degenerate (gap {gap:.3e} <= {threshold:.3e}); gradient undefined")]
    DegenerateEigenvalue {
        index: usize,
        gap: f64,
        threshold: f64,
    },

    #[error("shooting bracket not found: {0}")]
    BracketNotFound(String),

    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    #[error("optimizer stagnated: {0}")]
    OptimizerStagnation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
