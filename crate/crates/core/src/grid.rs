//! Uniform spatial grid on [-1, 1] and grid-attached state vectors.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform node grid on [-1, 1] with `n_cells` cells and `n_cells + 1` nodes.
///
/// Node 0 sits at x = -1 and node `n_cells` at x = +1. The trapezoid
/// quadrature weights (h/2 at the two boundary nodes, h inside) double as the
/// finite-volume cell widths, so quadrature and conservation talk about the
/// same measure.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    n_cells: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_cells == other.n_cells
    }
}

impl SpatialGrid {
    /// Build a grid with at least 8 cells.
    pub fn new(n_cells: usize) -> Result<Arc<Self>> {
        if n_cells < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 cells, got {n_cells}"
            )));
        }
        let spacing = 2.0 / n_cells as f64;
        let nodes: Vec<f64> = (0..=n_cells)
            .map(|i| {
                if i == n_cells {
                    1.0
                } else {
                    -1.0 + spacing * i as f64
                }
            })
            .collect();
        let mut weights = vec![spacing; n_cells + 1];
        weights[0] = 0.5 * spacing;
        weights[n_cells] = 0.5 * spacing;
        Ok(Arc::new(Self {
            n_cells,
            nodes,
            weights,
            spacing,
        }))
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Trapezoid quadrature weights (= finite-volume cell widths).
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Midpoint of the face between nodes i and i+1.
    pub fn face_midpoint(&self, i: usize) -> f64 {
        0.5 * (self.nodes[i] + self.nodes[i + 1])
    }

    /// Distance from node i to the nearest endpoint of [-1, 1].
    pub fn boundary_distance(&self, i: usize) -> f64 {
        (self.nodes[i] + 1.0).min(1.0 - self.nodes[i])
    }
}

/// Nodal values of a scalar field attached to a grid.
#[derive(Debug, Clone)]
pub struct StateVector {
    grid: Arc<SpatialGrid>,
    values: Vec<f64>,
}

impl StateVector {
    pub fn new(grid: Arc<SpatialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch {
                expected: grid.n_cells(),
                got: values.len().saturating_sub(1),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition(
                "state contains a non-finite value".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Sample a function of x at the nodes.
    pub fn from_fn(grid: &Arc<SpatialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<SpatialGrid>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Check that the state lives on the given grid.
    pub fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        if self.grid.n_cells() == grid.n_cells() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: grid.n_cells(),
                got: self.grid.n_cells(),
            })
        }
    }

    /// Check that two states live on the same grid.
    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.n_cells() == other.grid.n_cells() {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.grid.n_cells(),
                got: other.grid.n_cells(),
            })
        }
    }

    /// Elementwise difference on a shared grid.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Linearly interpolate nodal values onto another uniform grid over the
/// same interval.
pub fn resample_linear(values: &[f64], from: &SpatialGrid, to: &SpatialGrid) -> Vec<f64> {
    debug_assert_eq!(values.len(), from.n_nodes());
    let n_from = from.n_cells() as f64;
    to.nodes()
        .iter()
        .map(|&x| {
            let pos = (x + 1.0) / 2.0 * n_from;
            let i = (pos.floor() as usize).min(from.n_cells() - 1);
            let frac = pos - i as f64;
            values[i] * (1.0 - frac) + values[i + 1] * frac
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_of_eight_cells() {
        let g = SpatialGrid::new(8).unwrap();
        assert_eq!(g.n_nodes(), 9);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.node(0), -1.0);
        assert_eq!(g.node(8), 1.0);
        assert!((g.node(4)).abs() < 1e-15);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(SpatialGrid::new(2).is_err());
    }

    #[test]
    fn thousand_cells_spacing() {
        let g = SpatialGrid::new(1000).unwrap();
        assert!((g.spacing() - 0.002).abs() < 1e-15);
        assert_eq!(g.n_nodes(), 1001);
    }

    #[test]
    fn quad_weights_sum_to_length() {
        let g = SpatialGrid::new(37).unwrap();
        let total: f64 = g.quad_weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn state_requires_matching_length() {
        let g = SpatialGrid::new(8).unwrap();
        assert!(StateVector::new(Arc::clone(&g), vec![0.0; 5]).is_err());
        assert!(StateVector::new(g, vec![0.0; 9]).is_ok());
    }
}
