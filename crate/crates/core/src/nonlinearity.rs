//! Reaction terms f(x, t, u) with superlinear growth control.
//!
//! Admissible reactions satisfy |f(x,t,u)| <= delta_star |u|^theta together
//! with the two-sided sector condition
//!
//!   -nu (1 + |u|^(theta-1) + |v|^(theta-1)) (u-v)^2
//!        <= (f(u) - f(v)) (u - v) <= nu (u-v)^2,
//!
//! which forces f(x, t, 0) = 0. `check_sl_assumptions` probes both bounds on
//! a deterministic lattice plus seeded random draws with u, v in [-1, 1];
//! the sector constants are box-dependent, so the sampling box is part of
//! the check's contract.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type ReactionFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Nonlinearity {
    f: ReactionFn,
    theta: f64,
    delta_star: f64,
    nu: f64,
    label: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("label", &self.label)
            .field("theta", &self.theta)
            .field("delta_star", &self.delta_star)
            .field("nu", &self.nu)
            .finish()
    }
}

impl Nonlinearity {
    /// Checked constructor: rejects f that fails f(x, t, 0) = 0 on a sample
    /// of (x, t) points, or nonsense parameters.
    pub fn new(
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        theta: f64,
        delta_star: f64,
        nu: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let out = Self::new_unchecked(f, theta, delta_star, nu, label);
        if out.theta < 1.0 {
            return Err(Error::InvalidNonlinearity(format!(
                "theta must be >= 1, got {}",
                out.theta
            )));
        }
        if out.delta_star < 0.0 || out.nu < 0.0 {
            return Err(Error::InvalidNonlinearity(
                "delta_star and nu must be nonnegative".into(),
            ));
        }
        for i in 0..16 {
            let x = -1.0 + 2.0 * i as f64 / 15.0;
            for j in 0..4 {
                let t = j as f64 * 0.37;
                let v = out.eval(x, t, 0.0);
                if v.abs() > 1e-12 {
                    return Err(Error::InvalidNonlinearity(format!(
                        "{}: f({x}, {t}, 0) = {v} but the sector condition forces f(.,.,0) = 0",
                        out.label
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Unchecked constructor for terms that intentionally violate
    /// f(.,.,0) = 0, e.g. physical energy-balance forcings in Kelvin
    /// variables where the growth parameters are fitted bounds over the
    /// physical range rather than global sector constants.
    pub fn new_unchecked(
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        theta: f64,
        delta_star: f64,
        nu: f64,
        label: impl Into<String>,
    ) -> Self {
        Self {
            f: Arc::new(f),
            theta,
            delta_star,
            nu,
            label: label.into(),
        }
    }

    /// f identically zero.
    pub fn zero() -> Self {
        Self::new(|_, _, _| 0.0, 1.0, 0.0, 0.0, "zero").expect("zero term is valid")
    }

    /// f(u) = -delta u |u|^(theta-1). The lower sector bound holds globally
    /// with nu = delta * theta.
    pub fn power_decay(delta: f64, theta: f64) -> Result<Self> {
        if delta < 0.0 {
            return Err(Error::InvalidNonlinearity(
                "power_decay needs delta >= 0".into(),
            ));
        }
        Self::new(
            move |_, _, u: f64| -delta * u * u.abs().powf(theta - 1.0),
            theta,
            delta,
            delta * theta,
            format!("-{delta} u|u|^{}", theta - 1.0),
        )
    }

    /// A coalbedo-shaped absorption term f(u) = c * ramp(u) * u where ramp
    /// rises linearly from lo to hi across [us - eta, us + eta]. Nonnegative
    /// for u >= 0, linear growth (theta = 1).
    pub fn sellers_ramp_term(c: f64, lo: f64, hi: f64, us: f64, eta: f64) -> Result<Self> {
        if !(c >= 0.0 && 0.0 < lo && lo < hi && eta > 0.0) {
            return Err(Error::InvalidNonlinearity(
                "sellers_ramp_term needs c >= 0, 0 < lo < hi, eta > 0".into(),
            ));
        }
        let slope = (hi - lo) / (2.0 * eta);
        // d/du [ramp(u) u] <= hi + slope * |u|; over |u| <= 3 that caps the
        // one-sided Lipschitz constant used for nu.
        let nu = c * (hi + slope * 3.0);
        Self::new(
            move |_, _, u: f64| {
                let r = if u <= us - eta {
                    lo
                } else if u >= us + eta {
                    hi
                } else {
                    lo + slope * (u - (us - eta))
                };
                c * r * u
            },
            1.0,
            c * hi,
            nu,
            format!("{c} ramp[{lo},{hi}] u"),
        )
    }

    pub fn eval(&self, x: f64, t: f64, u: f64) -> f64 {
        (self.f)(x, t, u)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta_star(&self) -> f64 {
        self.delta_star
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Growth admissibility against a degeneracy class ceiling.
    pub fn admissible_growth(&self, theta_sup: f64) -> bool {
        self.theta < theta_sup
    }
}

/// Worst margins seen while probing the growth and sector bounds. Margins
/// are normalized residuals; nonnegative means the bound held.
#[derive(Debug, Clone)]
pub struct SlReport {
    pub pass: bool,
    /// min over samples of (delta_star |u|^theta - |f|) / max(1, delta_star |u|^theta)
    pub growth_margin: f64,
    /// min over pairs of (nu (u-v)^2 - (f(u)-f(v))(u-v)) / max(1, |...|)
    pub upper_margin: f64,
    /// min over pairs of ((f(u)-f(v))(u-v) + nu (1+|u|^(th-1)+|v|^(th-1))(u-v)^2) / max(1, |...|)
    pub lower_margin: f64,
    pub worst_point: (f64, f64, f64, f64),
}

/// Probe the growth and sector bounds on a lattice plus seeded random draws,
/// u and v ranging over [-1, 1].
pub fn check_sl_assumptions(f: &Nonlinearity, seed: u64) -> SlReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<(f64, f64, f64, f64)> = Vec::new();
    let lattice: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect();
    for &x in &[-1.0, -0.4, 0.0, 0.7, 1.0] {
        for &t in &[0.0, 0.5, 1.0] {
            for &u in &lattice {
                for &v in &lattice {
                    samples.push((x, t, u, v));
                }
            }
        }
    }
    for _ in 0..4000 {
        samples.push((
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(0.0..=2.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ));
    }

    let mut growth_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    let mut worst = (0.0, 0.0, 0.0, 0.0);
    let mut track = |margin: f64, current: &mut f64, pt: (f64, f64, f64, f64)| {
        if margin < *current {
            *current = margin;
            if margin < 0.0 {
                worst = pt;
            }
        }
    };

    let th = f.theta();
    for &(x, t, u, v) in &samples {
        let fu = f.eval(x, t, u);
        let bound = f.delta_star() * u.abs().powf(th);
        track(
            (bound - fu.abs()) / bound.max(1.0),
            &mut growth_margin,
            (x, t, u, v),
        );

        let fv = f.eval(x, t, v);
        let prod = (fu - fv) * (u - v);
        let d2 = (u - v) * (u - v);
        let upper = f.nu() * d2 - prod;
        track(upper / upper.abs().max(1.0), &mut upper_margin, (x, t, u, v));
        let envelope = f.nu() * (1.0 + u.abs().powf(th - 1.0) + v.abs().powf(th - 1.0)) * d2;
        let lower = prod + envelope;
        track(lower / lower.abs().max(1.0), &mut lower_margin, (x, t, u, v));
    }

    let tol = -1e-9;
    SlReport {
        pass: growth_margin >= tol && upper_margin >= tol && lower_margin >= tol,
        growth_margin,
        upper_margin,
        lower_margin,
        worst_point: worst,
    }
}
