//! Time-stepping output: stored states plus dense per-step diagnostics.

use crate::grid::StateVector;

/// Scalar diagnostics recorded at every time step.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub t: f64,
    /// L2 norm of the state.
    pub l2: f64,
    /// Weighted seminorm |u|_{1,a}.
    pub h1a_semi: f64,
    /// Pointwise minimum (nonnegativity witness).
    pub min_value: f64,
    /// L2 norm of the reaction term f(., t, u(t)).
    pub f_l2: f64,
}

/// Solution record: states at the storage stride (always including the
/// initial and final time) and diagnostics at every step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory stores >= 1 state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory stores >= 1 time")
    }

    /// Minimum nodal value over every step (from dense diagnostics).
    pub fn min_over_time(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_value)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest L2 norm over every step.
    pub fn sup_l2(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.l2).fold(0.0, f64::max)
    }
}
