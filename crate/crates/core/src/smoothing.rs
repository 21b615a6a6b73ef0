//! Discrete mollification, strictly positive smooth approximation, and
//! boundary window profiles used by the control synthesizer.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, StateVector};
use crate::norms::l2_norm;

/// Quintic smoothstep: 0 below 0, 1 above 1, C^2 transitions.
pub fn smoothstep(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        y * y * y * (10.0 + y * (-15.0 + 6.0 * y))
    }
}

/// Window that vanishes at both endpoints, equals one on the core
/// [-1 + margin, 1 - margin], and transitions with smoothstep^order.
/// Raising the order flattens the profile near the endpoints.
pub fn window_profile(grid: &Arc<SpatialGrid>, margin: f64, order: u32) -> Result<Vec<f64>> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::Precondition(format!(
            "window margin must lie in (0, 1), got {margin}"
        )));
    }
    Ok(grid
        .nodes()
        .iter()
        .map(|&x| {
            let d = (1.0 - x.abs()) / margin;
            smoothstep(d).powi(order as i32)
        })
        .collect())
}

/// Kernel-weighted local average with a compactly supported bump kernel of
/// the given radius. Weights are renormalized per node, so constants pass
/// through exactly and the output range never leaves the input range; a
/// radius below the grid spacing returns the input unchanged.
pub fn mollify(grid: &Arc<SpatialGrid>, values: &[f64], radius: f64) -> Vec<f64> {
    let h = grid.spacing();
    if radius < h {
        return values.to_vec();
    }
    let nodes = grid.nodes();
    let w = grid.quad_weights();
    let reach = (radius / h).floor() as usize;
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in lo..=hi {
            let z = (nodes[j] - nodes[i]) / radius;
            let s = 1.0 - z * z;
            if s > 1e-12 {
                let k = (-1.0 / s).exp() * w[j];
                num += k * values[j];
                den += k;
            }
        }
        out[i] = if den > 0.0 { num / den } else { values[i] };
    }
    out
}

/// Strictly positive smooth approximation of a nonnegative state: lift to
/// a small floor, mollify, and shrink floor and radius geometrically until
/// the weighted distance to the original drops below `target`. The output
/// minimum never falls below the final floor.
pub fn positive_smooth_approx(
    u: &StateVector,
    target: f64,
) -> Result<(StateVector, f64)> {
    if !target.is_finite() || target <= 0.0 {
        return Err(Error::Precondition(format!(
            "approximation budget must be positive, got {target}"
        )));
    }
    if u.min_value() < 0.0 {
        return Err(Error::Precondition(
            "positive approximation expects nonnegative input".into(),
        ));
    }
    let grid = u.grid();
    let scale = u.max_abs().max(1.0);
    let mut floor = (target / 8.0).min(0.1 * scale);
    let mut radius = 0.05;
    for _ in 0..48 {
        let lifted: Vec<f64> = u.values().iter().map(|&v| v.max(floor)).collect();
        let smooth = mollify(grid, &lifted, radius);
        let cand = StateVector::new(Arc::clone(grid), smooth)?;
        let err = l2_norm(&cand.sub(u)?);
        if err < target {
            return Ok((cand, err));
        }
        floor *= 0.5;
        radius *= 0.5;
    }
    Err(Error::BudgetUnreachable {
        budget: "positive smooth approximation",
        required: target,
        achieved: f64::INFINITY,
    })
}
