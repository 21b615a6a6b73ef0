//! Piecewise static multiplicative controls.
//!
//! A control is a finite family of spatial profiles alpha_k(x), each active
//! on one time slab: the first on [t0, t1], the k-th on (t_{k-1}, t_k].
//! Breakpoints start at 0 and increase strictly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

#[derive(Debug, Clone)]
pub struct PiecewiseStaticControl {
    grid: Arc<SpatialGrid>,
    /// t_0 = 0 < t_1 < ... < t_m; slab k (1-based) covers (t_{k-1}, t_k].
    breakpoints: Vec<f64>,
    /// One nodal profile per slab; profiles.len() = breakpoints.len() - 1.
    profiles: Vec<Vec<f64>>,
}

impl PiecewiseStaticControl {
    pub fn new(
        grid: Arc<SpatialGrid>,
        breakpoints: Vec<f64>,
        profiles: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidControl(
                "need at least one slab (two breakpoints)".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidControl(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        if breakpoints.iter().any(|t| !t.is_finite())
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidControl(
                "breakpoints must be finite and increase strictly".into(),
            ));
        }
        if profiles.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidControl(format!(
                "{} profiles for {} breakpoints",
                profiles.len(),
                breakpoints.len()
            )));
        }
        for (k, p) in profiles.iter().enumerate() {
            if p.len() != grid.n_nodes() {
                return Err(Error::GridMismatch {
                    expected: grid.n_cells(),
                    got: p.len().saturating_sub(1),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidControl(format!(
                    "profile {k} contains a non-finite value"
                )));
            }
        }
        Ok(Self {
            grid,
            breakpoints,
            profiles,
        })
    }

    /// Control that is identically zero on [0, t_end].
    pub fn zero(grid: &Arc<SpatialGrid>, t_end: f64) -> Result<Self> {
        Self::constant(grid, 0.0, t_end)
    }

    /// Single slab with a spatially constant value.
    pub fn constant(grid: &Arc<SpatialGrid>, value: f64, t_end: f64) -> Result<Self> {
        if !t_end.is_finite() || t_end <= 0.0 {
            return Err(Error::InvalidControl(format!(
                "slab must have positive length, got t_end = {t_end}"
            )));
        }
        Self::new(
            Arc::clone(grid),
            vec![0.0, t_end],
            vec![vec![value; grid.n_nodes()]],
        )
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn n_slabs(&self) -> usize {
        self.profiles.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Index of the slab active at time t (first slab includes t = 0).
    pub fn slab_index(&self, t: f64) -> Result<usize> {
        if t < self.breakpoints[0] || t > self.horizon() {
            return Err(Error::Precondition(format!(
                "t = {t} outside the control horizon [0, {}]",
                self.horizon()
            )));
        }
        if t == 0.0 {
            return Ok(0);
        }
        // slab k covers (t_{k-1}, t_k]
        let k = self
            .breakpoints
            .partition_point(|&b| b < t)
            .saturating_sub(1);
        Ok(k.min(self.profiles.len() - 1))
    }

    /// Profile active at time t.
    pub fn profile_at(&self, t: f64) -> Result<&[f64]> {
        Ok(&self.profiles[self.slab_index(t)?])
    }

    /// sup-norm of the positive part over all slabs and nodes.
    pub fn sup_positive_part(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0_f64, |m, &v| m.max(v.max(0.0)))
    }

    pub fn sup_abs(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// True when every profile value is <= tol.
    pub fn is_nonpositive(&self, tol: f64) -> bool {
        self.profiles
            .iter()
            .all(|p| p.iter().all(|&v| v <= tol))
    }

    /// Concatenate another control after this one; `other`'s breakpoints are
    /// shifted by this control's horizon.
    pub fn concat(&self, other: &PiecewiseStaticControl) -> Result<Self> {
        if self.grid.n_cells() != other.grid.n_cells() {
            return Err(Error::GridMismatch {
                expected: self.grid.n_cells(),
                got: other.grid.n_cells(),
            });
        }
        let t0 = self.horizon();
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.extend(other.breakpoints.iter().skip(1).map(|b| t0 + b));
        let mut profiles = self.profiles.clone();
        profiles.extend(other.profiles.iter().cloned());
        Self::new(Arc::clone(&self.grid), breakpoints, profiles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<SpatialGrid> {
        SpatialGrid::new(8).unwrap()
    }

    #[test]
    fn slab_lookup_boundaries() {
        let g = grid();
        let n = g.n_nodes();
        let c = PiecewiseStaticControl::new(
            Arc::clone(&g),
            vec![0.0, 0.5, 1.0],
            vec![vec![1.0; n], vec![2.0; n]],
        )
        .unwrap();
        assert_eq!(c.slab_index(0.0).unwrap(), 0);
        assert_eq!(c.slab_index(0.3).unwrap(), 0);
        assert_eq!(c.slab_index(0.5).unwrap(), 0); // slabs are left-open, right-closed
        assert_eq!(c.slab_index(0.7).unwrap(), 1);
        assert_eq!(c.slab_index(1.0).unwrap(), 1);
        assert!(c.slab_index(1.5).is_err());
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let g = grid();
        let n = g.n_nodes();
        assert!(
            PiecewiseStaticControl::new(Arc::clone(&g), vec![0.1, 0.5], vec![vec![0.0; n]])
                .is_err()
        );
        assert!(PiecewiseStaticControl::new(
            Arc::clone(&g),
            vec![0.0, 0.5, 0.5],
            vec![vec![0.0; n], vec![0.0; n]]
        )
        .is_err());
    }

    #[test]
    fn sup_norms() {
        let g = grid();
        let n = g.n_nodes();
        let c = PiecewiseStaticControl::new(
            Arc::clone(&g),
            vec![0.0, 1.0, 2.0],
            vec![vec![-3.0; n], vec![0.5; n]],
        )
        .unwrap();
        assert_eq!(c.sup_positive_part(), 0.5);
        assert_eq!(c.sup_abs(), 3.0);
        assert!(!c.is_nonpositive(0.0));
    }

    #[test]
    fn concatenation_shifts_breakpoints() {
        let g = grid();
        let a = PiecewiseStaticControl::constant(&g, 1.0, 0.5).unwrap();
        let b = PiecewiseStaticControl::constant(&g, -1.0, 0.25).unwrap();
        let c = a.concat(&b).unwrap();
        assert_eq!(c.breakpoints(), &[0.0, 0.5, 0.75]);
        assert_eq!(c.n_slabs(), 2);
    }
}
