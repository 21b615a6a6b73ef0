//! Numerics for 1-D reaction-diffusion equations whose diffusion
//! coefficient degenerates at the domain endpoints, steered by
//! piecewise-static multiplicative controls.
//!
//! The crate covers the full pipeline: classifying a degenerate diffusion
//! profile and its admissible boundary condition, assembling a
//! self-adjoint finite-volume operator, eigenanalysis, IMEX time
//! integration, synthesis of nonnegative-steering control schedules with
//! certified budget tracking, qualitative property verification, and an
//! energy-balance climate preset.

pub mod boundary;
pub mod climate;
pub mod control;
pub mod diffusion;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod nonlinearity;
pub mod norms;
pub mod operator;
pub mod selftest;
pub mod smoothing;
pub mod solver;
pub mod spectral;
pub mod synthesis;
pub mod trajectory;
pub mod verification;

pub use boundary::BoundaryCondition;
pub use control::PiecewiseStaticControl;
pub use diffusion::{classify_degeneracy, Classification, Degeneracy, DiffusionProfile};
pub use error::{Error, Result};
pub use grid::{SpatialGrid, StateVector};
pub use nonlinearity::Nonlinearity;
pub use operator::DiscreteOperator;
pub use solver::{solve, Scheme, SolverConfig};
pub use spectral::{eigendecompose, legendre_basis, SpectralBasis};
pub use synthesis::{synthesize, verify_plan, ControlPlan, PlanCheck, ShapeDesign, SynthesisConfig};
pub use trajectory::Trajectory;
