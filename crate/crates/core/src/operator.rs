//! Finite-volume discretization of u -> (a(x) u_x)_x on the node-centered
//! grid, with boundary closures matching the admissible condition for the
//! diffusion class.
//!
//! The matrix is assembled as M = W^{-1} K where W holds the quadrature
//! weights (equal to the cell widths) and K is symmetric tridiagonal with
//! off-diagonal entries a(face)/h. This makes M self-adjoint in the
//! weighted inner product and dissipative under the boundary sign
//! conventions, and conserves mass exactly in the weighted-Neumann case.

use std::sync::Arc;

use crate::boundary::BoundaryCondition;
use crate::diffusion::DiffusionProfile;
use crate::error::Result;
use crate::grid::{SpatialGrid, StateVector};

/// Tridiagonal discrete diffusion operator with its grid and boundary data.
#[derive(Clone)]
pub struct DiscreteOperator {
    grid: Arc<SpatialGrid>,
    bc: BoundaryCondition,
    /// coupling of row i to node i-1; entry 0 is zero
    sub: Vec<f64>,
    /// diagonal of M
    diag: Vec<f64>,
    /// coupling of row i to node i+1; last entry is zero
    sup: Vec<f64>,
    /// a evaluated at the face midpoints, length n_cells
    face_a: Vec<f64>,
}

impl DiscreteOperator {
    /// Assemble the operator for a diffusion profile and a boundary
    /// condition. Fails if the boundary condition is not the admissible one
    /// for the profile's degeneracy class.
    pub fn assemble(
        grid: &Arc<SpatialGrid>,
        profile: &DiffusionProfile,
        bc: &BoundaryCondition,
    ) -> Result<Self> {
        bc.check_compatibility(profile.degeneracy())?;
        let n = grid.n_cells();
        let h = grid.spacing();
        let inv_h2 = 1.0 / (h * h);

        let face_a: Vec<f64> = (0..n).map(|i| profile.eval(grid.face_midpoint(i))).collect();

        let mut sub = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut sup = vec![0.0; n + 1];

        for i in 1..n {
            sub[i] = face_a[i - 1] * inv_h2;
            sup[i] = face_a[i] * inv_h2;
            diag[i] = -(face_a[i - 1] + face_a[i]) * inv_h2;
        }

        match *bc {
            BoundaryCondition::WeightedNeumann => {
                // boundary cells have width h/2 and zero flux through the
                // endpoint faces, so only the interior face contributes
                sup[0] = 2.0 * face_a[0] * inv_h2;
                diag[0] = -sup[0];
                sub[n] = 2.0 * face_a[n - 1] * inv_h2;
                diag[n] = -sub[n];
            }
            BoundaryCondition::Robin { beta0, beta1, gamma0, gamma1 } => {
                if beta1 != 0.0 {
                    // flux trace (a u_x)(-1) = -(beta0/beta1) u(-1) enters
                    // the boundary-cell balance
                    sup[0] = 2.0 * face_a[0] * inv_h2;
                    diag[0] = -sup[0] + 2.0 * (beta0 / beta1) / h;
                } else {
                    // homogeneous trace at the endpoint: decouple the node
                    // and drop its column so K stays symmetric
                    sup[0] = 0.0;
                    diag[0] = -2.0 * face_a[0] * inv_h2;
                    sub[1] = 0.0;
                }
                if gamma1 != 0.0 {
                    sub[n] = 2.0 * face_a[n - 1] * inv_h2;
                    diag[n] = -sub[n] - 2.0 * (gamma0 / gamma1) / h;
                } else {
                    sub[n] = 0.0;
                    diag[n] = -2.0 * face_a[n - 1] * inv_h2;
                    sup[n - 1] = 0.0;
                }
            }
        }

        Ok(Self { grid: Arc::clone(grid), bc: *bc, sub, diag, sup, face_a })
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.bc
    }

    /// Bands of M: (sub, diag, sup).
    pub fn bands(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.sub, &self.diag, &self.sup)
    }

    /// Apply M to nodal values.
    pub fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        debug_assert_eq!(n, self.diag.len());
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.sub[i] * u[i - 1];
            }
            if i < n - 1 {
                v += self.sup[i] * u[i + 1];
            }
            out[i] = v;
        }
        out
    }

    /// Apply M to a state on the same grid.
    pub fn apply(&self, u: &StateVector) -> Result<StateVector> {
        u.check_grid(&self.grid)?;
        StateVector::new(Arc::clone(&self.grid), self.apply_slice(u.values()))
    }

    /// The diffusion coefficient sampled at the face midpoints.
    pub fn face_values(&self) -> &[f64] {
        &self.face_a
    }

    /// Discrete flux a(face) (u_{i+1} - u_i)/h through interior face i,
    /// for i in 0..n_cells.
    pub fn face_flux(&self, u: &[f64], i: usize) -> f64 {
        self.face_a[i] * (u[i + 1] - u[i]) / self.grid.spacing()
    }

    /// One-sided extrapolations of the flux to the endpoints, from the two
    /// nearest interior faces. Returns (flux at -1, flux at +1).
    pub fn boundary_flux_estimate(&self, u: &[f64]) -> (f64, f64) {
        let n = self.grid.n_cells();
        let left = 0.5 * (3.0 * self.face_flux(u, 0) - self.face_flux(u, 1));
        let right = 0.5 * (3.0 * self.face_flux(u, n - 1) - self.face_flux(u, n - 2));
        (left, right)
    }

    /// Bands (diag, sub) of the symmetric nonnegative-definite form
    /// S = -W^{1/2} M W^{-1/2}, whose eigenpairs (lambda, v) map to
    /// eigenpairs (lambda, W^{-1/2} v) of -M. sub[i] couples rows i and
    /// i+1; its last entry is zero.
    pub fn symmetric_form(&self) -> (Vec<f64>, Vec<f64>) {
        let w = self.grid.quad_weights();
        let n = self.diag.len();
        let d: Vec<f64> = self.diag.iter().map(|&q| -q).collect();
        let mut e = vec![0.0; n];
        for i in 0..n - 1 {
            // K_{i,i+1} = w_i * sup_i = w_{i+1} * sub_{i+1} by construction
            let k = w[i] * self.sup[i];
            e[i] = -k / (w[i] * w[i + 1]).sqrt();
        }
        e[n - 1] = 0.0;
        (d, e)
    }
}
