use thiserror::Error;

/// Errors shared by the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid diffusion profile: {0}")]
    InvalidProfile(String),

    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),

    #[error("boundary condition {bc} is not admissible for degeneracy class {class}")]
    BoundaryMismatch { bc: String, class: String },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("grid mismatch: expected {expected} cells, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver did not converge within {0} iterations")]
    EigenNoConvergence(usize),

    #[error("Newton iteration diverged at t = {t}: residual {residual}")]
    NewtonDiverged { t: f64, residual: f64 },

    #[error("state became non-finite at t = {0}")]
    NonFiniteState(f64),

    #[error("budget `{budget}` unreachable: needed {required}, best achieved {achieved}")]
    BudgetUnreachable {
        budget: &'static str,
        required: f64,
        achieved: f64,
    },

    #[error("smoothing could not meet the boundary flatness requirement at order {0}")]
    FlatnessUnreachable(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
