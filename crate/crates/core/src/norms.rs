//! Weighted L2 / H1 quantities evaluated with the grid's quadrature.
//!
//! The plain L2 norm uses trapezoid weights; the weighted seminorm
//! |u|_{1,a}^2 = int a(x) u_x^2 dx uses midpoint-sampled a on the faces with
//! one-sided differences, which keeps it finite for degenerate a.

use crate::diffusion::DiffusionProfile;
use crate::grid::StateVector;

/// Quadrature inner product <u, v> = sum w_i u_i v_i.
pub fn inner_product(u: &StateVector, v: &StateVector) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let w = u.grid().quad_weights();
    u.values()
        .iter()
        .zip(v.values())
        .zip(w)
        .map(|((a, b), wi)| wi * a * b)
        .sum()
}

/// Trapezoid L2 norm of a state.
pub fn l2_norm(u: &StateVector) -> f64 {
    inner_product(u, u).max(0.0).sqrt()
}

/// L2 norm of a raw nodal vector on the given weights.
pub fn l2_norm_raw(values: &[f64], weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// Integral of u over [-1, 1] (the conserved quantity under weighted
/// Neumann conditions with no reaction).
pub fn mass(u: &StateVector) -> f64 {
    let w = u.grid().quad_weights();
    u.values().iter().zip(w).map(|(v, wi)| wi * v).sum()
}

/// Weighted seminorm |u|_{1,a} = || sqrt(a) u_x ||_{L2}, faces sampled at
/// midpoints.
pub fn h1a_seminorm(u: &StateVector, a: &DiffusionProfile) -> f64 {
    let grid = u.grid();
    let h = grid.spacing();
    let vals = u.values();
    let mut acc = 0.0;
    for i in 0..grid.n_cells() {
        let am = a.eval(grid.face_midpoint(i));
        let du = (vals[i + 1] - vals[i]) / h;
        acc += am * du * du * h;
    }
    acc.max(0.0).sqrt()
}

/// Same seminorm from presampled face coefficients; used where the
/// diffusion profile has already been discretized.
pub fn h1a_seminorm_faces(values: &[f64], face_a: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..face_a.len() {
        let du = (values[i + 1] - values[i]) / h;
        acc += face_a[i] * du * du * h;
    }
    acc.max(0.0).sqrt()
}

/// Full weighted norm ||u||_{1,a}^2 = ||u||^2 + |u|_{1,a}^2.
pub fn h1a_norm(u: &StateVector, a: &DiffusionProfile) -> f64 {
    let l2 = l2_norm(u);
    let semi = h1a_seminorm(u, a);
    (l2 * l2 + semi * semi).sqrt()
}

/// Pointwise positive and negative parts, u = u+ - u-.
pub fn pos_neg_parts(u: &StateVector) -> (StateVector, StateVector) {
    let grid = u.grid().clone();
    let pos: Vec<f64> = u.values().iter().map(|&v| v.max(0.0)).collect();
    let neg: Vec<f64> = u.values().iter().map(|&v| (-v).max(0.0)).collect();
    (
        StateVector::new(grid.clone(), pos).expect("same length"),
        StateVector::new(grid, neg).expect("same length"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;

    #[test]
    fn l2_of_one_is_sqrt2() {
        let g = SpatialGrid::new(100).unwrap();
        let u = StateVector::constant(&g, 1.0);
        assert!((l2_norm(&u) - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn l2_of_zero_is_zero() {
        let g = SpatialGrid::new(64).unwrap();
        let u = StateVector::constant(&g, 0.0);
        assert_eq!(l2_norm(&u), 0.0);
    }

    #[test]
    fn l2_of_x_matches_exact_integral() {
        // int x^2 over [-1,1] = 2/3; trapezoid nodes include the endpoints so
        // the quadrature error is O(h^2).
        let g = SpatialGrid::new(4000).unwrap();
        let u = StateVector::from_fn(&g, |x| x);
        assert!((l2_norm(&u) - (2.0_f64 / 3.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn l2_quadrature_is_second_order() {
        // e^x has non-vanishing odd derivatives at the endpoints, so the
        // trapezoid error follows the generic O(h^2) Euler-Maclaurin term.
        // (cos(pi x) is 2-periodic on [-1,1] and superconverges; see below.)
        let exact = ((2.0_f64.exp() - (-2.0_f64).exp()) / 2.0).sqrt();
        let errs: Vec<f64> = [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let g = SpatialGrid::new(n).unwrap();
                let u = StateVector::from_fn(&g, |x| x.exp());
                (l2_norm(&u) - exact).abs()
            })
            .collect();
        for k in 0..errs.len() - 1 {
            let rate = (errs[k] / errs[k + 1]).log2();
            assert!(
                (1.8..=2.2).contains(&rate),
                "quadrature rate {rate} out of range"
            );
        }
    }

    #[test]
    fn l2_superconverges_on_periodic_integrand() {
        // cos^2(pi x) integrates exactly to 1 under the trapezoid rule on a
        // uniform grid of the full period, so the error is pure roundoff.
        let g = SpatialGrid::new(64).unwrap();
        let u = StateVector::from_fn(&g, |x| (std::f64::consts::PI * x).cos());
        assert!((l2_norm(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seminorm_of_constant_vanishes() {
        let g = SpatialGrid::new(128).unwrap();
        let a = DiffusionProfile::legendre();
        let u = StateVector::constant(&g, 4.2);
        assert_eq!(h1a_seminorm(&u, &a), 0.0);
    }

    #[test]
    fn seminorm_of_x_with_legendre_profile() {
        // int (1 - x^2) * 1 dx = 4/3, and the midpoint rule is exact up to
        // O(h^2) for the quadratic weight.
        let g = SpatialGrid::new(4000).unwrap();
        let a = DiffusionProfile::legendre();
        let u = StateVector::from_fn(&g, |x| x);
        assert!((h1a_seminorm(&u, &a) - (4.0_f64 / 3.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn seminorm_of_first_legendre_mode() {
        // omega_1 = sqrt(3/2) x has |omega_1|_{1,a} = sqrt(lambda_1) = sqrt(2).
        let g = SpatialGrid::new(4000).unwrap();
        let a = DiffusionProfile::legendre();
        let u = StateVector::from_fn(&g, |x| (1.5_f64).sqrt() * x);
        assert!((h1a_seminorm(&u, &a) - 2.0_f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn pos_neg_split_examples() {
        let g = SpatialGrid::new(10).unwrap();
        let u = StateVector::constant(&g, -3.0);
        let (p, n) = pos_neg_parts(&u);
        assert!(p.values().iter().all(|&v| v == 0.0));
        assert!(n.values().iter().all(|&v| v == 3.0));

        let x = StateVector::from_fn(&g, |x| x);
        let (p, n) = pos_neg_parts(&x);
        for (i, &xi) in x.grid().nodes().iter().enumerate() {
            assert_eq!(p.values()[i], xi.max(0.0));
            assert_eq!(n.values()[i], (-xi).max(0.0));
        }

        let z = StateVector::constant(&g, 0.0);
        let (p, n) = pos_neg_parts(&z);
        assert!(p.values().iter().chain(n.values()).all(|&v| v == 0.0));
    }
}
