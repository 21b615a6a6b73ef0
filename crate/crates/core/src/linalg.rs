//! Tridiagonal kernels: Thomas solve, symmetric QL eigenvalues with
//! implicit shifts, and inverse iteration for selected eigenvectors.

use crate::error::{Error, Result};

/// Solve a tridiagonal system in place. `sub[i]` couples row i to i-1
/// (sub[0] ignored), `sup[i]` couples row i to i+1 (last entry ignored).
/// Plain forward elimination without pivoting; intended for diagonally
/// dominant systems (implicit Euler matrices, shifted eigenproblems with a
/// regularized shift).
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::Precondition("zero pivot in tridiagonal solve".into()));
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 {
            return Err(Error::Precondition(format!(
                "zero pivot in tridiagonal solve at row {i}"
            )));
        }
        if i < n - 1 {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Eigenvalues of a symmetric tridiagonal matrix by the QL algorithm with
/// implicit shifts. `d` holds the diagonal, `e` the subdiagonal (e[0]
/// unused convention: e has length n with e[n-1] spare). Returns the
/// eigenvalues unsorted in d's slots. Total rotation sweeps are capped at
/// `50 * n` as a safety valve.
pub fn ql_implicit_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    debug_assert_eq!(e.len(), n);
    // shift e so that e[i] couples d[i] and d[i+1], e[n-1] = 0
    e[n - 1] = 0.0;
    let cap = 50 * n;
    let mut iterations = 0usize;
    for l in 0..n {
        loop {
            // find a small off-diagonal element
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > cap {
                return Err(Error::EigenNoConvergence(cap));
            }
            // implicit shift from the leading 2x2 of the active block
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut broke_early = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // rotation annihilated prematurely; restart this block
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    broke_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if broke_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// One eigenvector of a symmetric tridiagonal matrix (diag `d`, subdiag `e`
/// with e[i] coupling i and i+1) for an eigenvalue estimate `lambda`, by
/// inverse iteration with a regularized shift. The returned vector has unit
/// Euclidean norm.
pub fn inverse_iteration(d: &[f64], e: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = d.len();
    let scale = d
        .iter()
        .map(|v| v.abs())
        .chain(e.iter().map(|v| v.abs()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let mut shift = lambda;
    let mut sub = vec![0.0; n];
    let mut sup = vec![0.0; n];
    sub[1..n].copy_from_slice(&e[..n - 1]);
    sup[..n - 1].copy_from_slice(&e[..n - 1]);

    // deterministic pseudo-random start vector
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let mut z = (i as u64).wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(0x2545f4914f6cdd1d);
            z ^= z >> 33;
            z = z.wrapping_mul(0xff51afd7ed558ccd);
            z ^= z >> 33;
            (z as f64 / u64::MAX as f64) - 0.5
        })
        .collect();
    normalize(&mut v);

    for attempt in 0..6 {
        let eps = scale * 1e-12 * 10f64.powi(attempt);
        let diag: Vec<f64> = d.iter().map(|&x| x - (shift + eps)).collect();
        let mut ok = true;
        for _ in 0..4 {
            match thomas_solve(&sub, &diag, &sup, &v) {
                Ok(w) => {
                    v = w;
                    let norm = normalize(&mut v);
                    if !norm.is_finite() || norm == 0.0 {
                        ok = false;
                        break;
                    }
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            // residual check ||T v - lambda v||
            let mut res = 0.0;
            for i in 0..n {
                let mut tv = d[i] * v[i];
                if i > 0 {
                    tv += e[i - 1] * v[i - 1];
                }
                if i < n - 1 {
                    tv += e[i] * v[i + 1];
                }
                let r = tv - lambda * v[i];
                res += r * r;
            }
            if res.sqrt() <= 1e-8 * scale {
                return Ok(v);
            }
        }
        shift = lambda; // retry with a larger regularization
    }
    Err(Error::EigenNoConvergence(6))
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Remove components of `v` along each (unit) vector in `basis`, then
/// renormalize. Used for near-degenerate eigenvalue clusters.
pub fn orthogonalize_against(v: &mut [f64], basis: &[&[f64]]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
        for (x, c) in v.iter_mut().zip(b.iter()) {
            *x -= dot * c;
        }
    }
    normalize(v);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_recovers_known_solution() {
        // -1 2 -1 Laplacian-style system against a manufactured solution
        let n = 50;
        let sub = vec![-1.0; n];
        let sup = vec![-1.0; n];
        let diag = vec![2.5; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 2.5 * x_true[i];
            if i > 0 {
                rhs[i] -= x_true[i - 1];
            }
            if i < n - 1 {
                rhs[i] -= x_true[i + 1];
            }
        }
        let x = thomas_solve(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ql_matches_known_laplacian_spectrum() {
        // second-difference matrix with eigenvalues 2 - 2 cos(k pi / (n+1))
        let n = 40;
        let mut d = vec![2.0; n];
        let mut e = vec![-1.0; n];
        ql_implicit_eigenvalues(&mut d, &mut e).unwrap();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, &lam) in d.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((lam - exact).abs() < 1e-10, "k={k}: {lam} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvector() {
        let n = 40;
        let d = vec![2.0; n];
        let mut e = vec![-1.0; n];
        e[n - 1] = 0.0;
        let lam = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let v = inverse_iteration(&d, &e, lam).unwrap();
        // compare against sin(k pi j / (n+1)) up to sign
        let mut expect: Vec<f64> = (0..n)
            .map(|j| ((j + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).sin())
            .collect();
        let norm = expect.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut expect {
            *x /= norm;
        }
        let sign = if v[0] * expect[0] >= 0.0 { 1.0 } else { -1.0 };
        for (a, b) in v.iter().zip(&expect) {
            assert!((a - sign * b).abs() < 1e-8);
        }
    }
}
