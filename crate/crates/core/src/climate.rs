//! Energy-balance climate presets: the 1-D latitude model with diffusion
//! coefficient 1 - x^2 (x = sine of latitude), absorbed shortwave
//! radiation Q S(x,t) beta(u) and outgoing longwave emission R(u), with
//! unit heat capacity. Temperatures are in Kelvin.
//!
//! The balance law u_t - ((1-x^2) u_x)_x = Q S beta(u) - R(u) is mapped
//! onto the solver's bilinear structure u_t - (a u_x)_x = alpha u + f in
//! one of two ways, selected by [`ClimateCoupling`]:
//!
//! * `StateControl`: the control slot holds alpha = Q S sampled onto
//!   static slabs, and f(x,t,u) = Q S (beta(u) - u) - R(u) carries the
//!   remainder, so alpha u + f reproduces the balance law exactly. This
//!   exposes the physical forcing through the same slot the steering
//!   machinery controls.
//! * `CoalbedoControl`: the forcing multiplies the coalbedo rather than
//!   the state, so the product Q S beta(u) cannot enter the bilinear
//!   slot; the whole right-hand side is carried by f and the control
//!   slot stays zero.
//!
//! Both couplings sample time-dependent insolation as piecewise-static
//! in time (one value per slab), so they integrate exactly the same
//! dynamics. Default constants are calibration artifacts chosen so that
//! a uniform 288.15 K state is near equilibrium; only the snow-line
//! threshold 263.15 K and the reference temperature 288.15 K carry
//! physical meaning on their own.

use std::sync::Arc;

use crate::boundary::BoundaryCondition;
use crate::control::PiecewiseStaticControl;
use crate::diffusion::DiffusionProfile;
use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, StateVector};
use crate::nonlinearity::Nonlinearity;
use crate::operator::DiscreteOperator;
use crate::solver::{solve, SolverConfig};
use crate::trajectory::Trajectory;

/// Heat capacity is normalized away; kept as a named constant so the
/// normalization is visible at the call sites that would otherwise
/// divide by it.
pub const HEAT_CAPACITY: f64 = 1.0;

/// Scale inside the opacity tanh of the gray-body emission law; with u
/// in Kelvin the argument 19e-16 u^6 crosses 1 near 280 K.
const OPACITY_TANH_SCALE: f64 = 19.0e-16;

/// Coalbedo (absorbed fraction of incident shortwave) as a nondecreasing
/// function of temperature, switching between an ice value and a warm
/// value around a snow-line threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoalbedoModel {
    /// Piecewise-linear ramp over [threshold - halfwidth, threshold + halfwidth].
    SellersRamp { ice: f64, warm: f64, threshold: f64, halfwidth: f64 },
    /// Discontinuous jump at the threshold (midpoint value exactly there).
    /// Violates the Lipschitz sector condition; gated behind an
    /// acknowledgement flag where that condition matters.
    BudykoStep { ice: f64, warm: f64, threshold: f64 },
    /// Smooth tanh regularization of the step with the given width.
    BudykoRegularized { ice: f64, warm: f64, threshold: f64, width: f64 },
}

impl CoalbedoModel {
    /// Ramp defaults: ice 0.38, warm 0.71, snow line 263.15 K, 10 K halfwidth.
    pub fn default_ramp() -> Self {
        Self::SellersRamp { ice: 0.38, warm: 0.71, threshold: 263.15, halfwidth: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (ice, warm, width_ok) = match *self {
            Self::SellersRamp { ice, warm, halfwidth, .. } => (ice, warm, halfwidth > 0.0),
            Self::BudykoStep { ice, warm, .. } => (ice, warm, true),
            Self::BudykoRegularized { ice, warm, width, .. } => (ice, warm, width > 0.0),
        };
        if !(0.0 < ice && ice < warm && warm < 1.0) {
            return Err(Error::Precondition(format!(
                "coalbedo needs 0 < ice < warm < 1, got ice = {ice}, warm = {warm}"
            )));
        }
        if !width_ok {
            return Err(Error::Precondition("coalbedo transition width must be positive".into()));
        }
        Ok(())
    }

    /// Absorbed fraction at temperature `u`; always within [ice, warm].
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Self::SellersRamp { ice, warm, threshold, halfwidth } => {
                if u <= threshold - halfwidth {
                    ice
                } else if u >= threshold + halfwidth {
                    warm
                } else {
                    ice + (warm - ice) * (u - (threshold - halfwidth)) / (2.0 * halfwidth)
                }
            }
            Self::BudykoStep { ice, warm, threshold } => {
                if u < threshold {
                    ice
                } else if u > threshold {
                    warm
                } else {
                    0.5 * (ice + warm)
                }
            }
            Self::BudykoRegularized { ice, warm, threshold, width } => {
                ice + (warm - ice) * 0.5 * (1.0 + ((u - threshold) / width).tanh())
            }
        }
    }

    /// Lipschitz constant of the temperature dependence, when defined.
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            Self::SellersRamp { ice, warm, halfwidth, .. } => {
                Some((warm - ice) / (2.0 * halfwidth))
            }
            Self::BudykoStep { .. } => None,
            Self::BudykoRegularized { ice, warm, width, .. } => Some((warm - ice) / (2.0 * width)),
        }
    }

    pub fn is_discontinuous(&self) -> bool {
        matches!(self, Self::BudykoStep { .. })
    }
}

/// Outgoing longwave emission as a function of temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmissionModel {
    /// R(u) = intercept + slope * u with u in Kelvin. The conventional
    /// Celsius calibration (214.2 + 1.9 * T_C) translates to a negative
    /// Kelvin intercept.
    BudykoLinear { intercept: f64, slope: f64 },
    /// Gray-body law R(u) = sigma u^4 (1 - opacity * tanh(19e-16 u^6)).
    SellersStefanBoltzmann { sigma: f64, opacity: f64 },
}

impl EmissionModel {
    /// Linear defaults calibrated so a uniform 288.15 K state is near
    /// equilibrium under the default insolation and warm coalbedo.
    pub fn default_linear() -> Self {
        Self::BudykoLinear { intercept: -304.8, slope: 1.9 }
    }

    pub fn default_gray_body() -> Self {
        Self::SellersStefanBoltzmann { sigma: 5.67e-8, opacity: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::BudykoLinear { slope, .. } => {
                if !slope.is_finite() || slope <= 0.0 {
                    return Err(Error::Precondition(format!(
                        "linear emission slope must be positive, got {slope}"
                    )));
                }
            }
            Self::SellersStefanBoltzmann { sigma, opacity } => {
                if !(sigma > 0.0 && opacity > 0.0) {
                    return Err(Error::Precondition(
                        "gray-body emission needs sigma > 0 and opacity > 0".into(),
                    ));
                }
                for i in 0..=200 {
                    let u = 150.0 + i as f64;
                    let emissivity = 1.0 - opacity * (OPACITY_TANH_SCALE * u.powi(6)).tanh();
                    if emissivity <= 0.0 {
                        return Err(Error::Precondition(format!(
                            "gray-body emissivity nonpositive at {u} K \
                             (sigma = {sigma}, opacity = {opacity})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Self::BudykoLinear { intercept, slope } => intercept + slope * u,
            Self::SellersStefanBoltzmann { sigma, opacity } => {
                sigma * u.powi(4) * (1.0 - opacity * (OPACITY_TANH_SCALE * u.powi(6)).tanh())
            }
        }
    }
}

/// Incident shortwave distribution Q S(x,t); S is normalized to mean one
/// in the annual profile. The quadratic latitude shape is the standard
/// second-Legendre-moment fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InsolationProfile {
    /// S(x) = 1 - c * (3x^2 - 1)/2.
    Annual { q: f64, p2_coefficient: f64 },
    /// S constant in x and t.
    Uniform { q: f64 },
    /// Annual shape modulated by 1 + amplitude * cos(2 pi t / period).
    Seasonal { q: f64, p2_coefficient: f64, amplitude: f64, period: f64 },
}

impl InsolationProfile {
    pub fn default_annual() -> Self {
        Self::Annual { q: 342.0, p2_coefficient: 0.482 }
    }

    pub fn validate(&self) -> Result<()> {
        let (q, c, amp, period) = match *self {
            Self::Annual { q, p2_coefficient } => (q, p2_coefficient, 0.0, 1.0),
            Self::Uniform { q } => (q, 0.0, 0.0, 1.0),
            Self::Seasonal { q, p2_coefficient, amplitude, period } => {
                (q, p2_coefficient, amplitude, period)
            }
        };
        if !q.is_finite() || q < 0.0 {
            return Err(Error::Precondition(format!("insolation scale must be >= 0, got {q}")));
        }
        if !c.is_finite() || c.abs() >= 1.0 {
            return Err(Error::Precondition(format!(
                "latitude coefficient must satisfy |c| < 1 to keep S positive, got {c}"
            )));
        }
        if !(0.0..1.0).contains(&amp) {
            return Err(Error::Precondition(format!(
                "seasonal amplitude must lie in [0, 1), got {amp}"
            )));
        }
        if !period.is_finite() || period <= 0.0 {
            return Err(Error::Precondition(format!("period must be positive, got {period}")));
        }
        // positivity and declared periodicity on a sample lattice
        for i in 0..=16 {
            let x = -1.0 + 0.125 * i as f64;
            for j in 0..8 {
                let t = period * j as f64 / 7.0;
                let s = self.eval(x, t);
                if s.is_nan() || s < 0.0 {
                    return Err(Error::Precondition(format!(
                        "insolation negative at x = {x}, t = {t}"
                    )));
                }
                if let Self::Seasonal { .. } = self {
                    if (self.eval(x, t + self.period()) - s).abs() > 1e-9 {
                        return Err(Error::Precondition(
                            "seasonal insolation failed its declared periodicity".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Q S(x, t).
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let p2 = 0.5 * (3.0 * x * x - 1.0);
        match *self {
            Self::Annual { q, p2_coefficient } => q * (1.0 - p2_coefficient * p2),
            Self::Uniform { q } => q,
            Self::Seasonal { q, p2_coefficient, amplitude, period } => {
                q * (1.0 - p2_coefficient * p2)
                    * (1.0 + amplitude * (2.0 * std::f64::consts::PI * t / period).cos())
            }
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Self::Seasonal { .. })
    }

    pub fn period(&self) -> f64 {
        match *self {
            Self::Seasonal { period, .. } => period,
            _ => f64::INFINITY,
        }
    }

    pub fn is_uniform_in_x(&self) -> bool {
        matches!(self, Self::Uniform { .. })
    }
}

/// How the radiative forcing is split between the bilinear control slot
/// and the reaction term; see the module docs for the exact algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClimateCoupling {
    /// alpha = Q S in the control slot, remainder in f (default).
    #[default]
    StateControl,
    /// Control slot zero; the forcing multiplies the coalbedo inside f.
    CoalbedoControl,
}

/// Growth and sector bounds fitted by sampling over the physical
/// temperature range [150, 350] K; these are box-dependent bounds, not
/// global sector constants.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFit {
    pub theta: f64,
    pub delta_star: f64,
    pub nu: f64,
}

/// The radiative right-hand side mapped onto the bilinear solver slots.
#[derive(Clone)]
pub struct ClimateForcing {
    coalbedo: CoalbedoModel,
    emission: EmissionModel,
    insolation: InsolationProfile,
    coupling: ClimateCoupling,
}

impl ClimateForcing {
    pub fn coupling(&self) -> ClimateCoupling {
        self.coupling
    }

    /// The control-slot adapter: Q S sampled at slab midpoints under
    /// `StateControl`, identically zero under `CoalbedoControl`.
    pub fn control(
        &self,
        grid: &Arc<SpatialGrid>,
        t_final: f64,
        n_slabs: usize,
    ) -> Result<PiecewiseStaticControl> {
        if n_slabs == 0 || !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::Precondition(
                "forcing needs a positive horizon and at least one slab".into(),
            ));
        }
        let dt_slab = t_final / n_slabs as f64;
        let breakpoints: Vec<f64> = (0..=n_slabs)
            .map(|k| if k == n_slabs { t_final } else { k as f64 * dt_slab })
            .collect();
        let profiles: Vec<Vec<f64>> = (0..n_slabs)
            .map(|k| {
                let t_mid = (k as f64 + 0.5) * dt_slab;
                grid.nodes()
                    .iter()
                    .map(|&x| match self.coupling {
                        ClimateCoupling::StateControl => self.insolation.eval(x, t_mid),
                        ClimateCoupling::CoalbedoControl => 0.0,
                    })
                    .collect()
            })
            .collect();
        PiecewiseStaticControl::new(Arc::clone(grid), breakpoints, profiles)
    }

    /// The reaction term, sampling time-dependent insolation with the
    /// same slab midpoints as [`ClimateForcing::control`] so the two
    /// slots stay algebraically consistent.
    pub fn reaction(&self, t_final: f64, n_slabs: usize) -> Nonlinearity {
        let coalbedo = self.coalbedo;
        let emission = self.emission;
        let insolation = self.insolation;
        let coupling = self.coupling;
        let dt_slab = t_final / n_slabs.max(1) as f64;
        let fit = self.fit(t_final);
        // The nudge keeps boundary times in the slab that starts there:
        // k*dt_slab/dt_slab can round to k - 1e-14, and without it the
        // reaction would sample the old slab for one step while the
        // control slot already uses the new one, breaking their
        // cancellation by O(|u| d(qs)) for that step.
        let sampled_forcing = move |x: f64, t: f64| {
            let k = ((t / dt_slab + 1e-9).floor().max(0.0) as usize).min(n_slabs.max(1) - 1);
            insolation.eval(x, (k as f64 + 0.5) * dt_slab)
        };
        let label = match coupling {
            ClimateCoupling::StateControl => "radiative-remainder",
            ClimateCoupling::CoalbedoControl => "radiative-full",
        };
        Nonlinearity::new_unchecked(
            move |x, t, u| {
                let qs = sampled_forcing(x, t);
                match coupling {
                    ClimateCoupling::StateControl => {
                        qs * (coalbedo.eval(u) - u) - emission.eval(u)
                    }
                    ClimateCoupling::CoalbedoControl => qs * coalbedo.eval(u) - emission.eval(u),
                }
            },
            fit.theta,
            fit.delta_star,
            fit.nu,
            label,
        )
    }

    /// Sample the reaction over x in [-1,1], t in [0, t_final], u in
    /// [150, 350] K and report fitted growth/sector bounds: theta = 1
    /// (linear growth class on a bounded Kelvin box), delta_star the max
    /// of |f|/|u|, nu the positive part of the steepest upward secant.
    pub fn fit(&self, t_final: f64) -> GrowthFit {
        let coalbedo = self.coalbedo;
        let emission = self.emission;
        let insolation = self.insolation;
        let coupling = self.coupling;
        let f = |x: f64, t: f64, u: f64| {
            let qs = insolation.eval(x, t);
            match coupling {
                ClimateCoupling::StateControl => qs * (coalbedo.eval(u) - u) - emission.eval(u),
                ClimateCoupling::CoalbedoControl => qs * coalbedo.eval(u) - emission.eval(u),
            }
        };
        let xs: Vec<f64> = (0..=8).map(|i| -1.0 + 0.25 * i as f64).collect();
        let ts: Vec<f64> = (0..=4).map(|j| t_final * j as f64 / 4.0).collect();
        let us: Vec<f64> = (0..=400).map(|k| 150.0 + 0.5 * k as f64).collect();
        let mut delta_star = 0.0_f64;
        let mut nu = 0.0_f64;
        for &x in &xs {
            for &t in &ts {
                let mut prev: Option<(f64, f64)> = None;
                for &u in &us {
                    let fu = f(x, t, u);
                    delta_star = delta_star.max(fu.abs() / u.abs());
                    if let Some((up, fp)) = prev {
                        nu = nu.max((fu - fp) / (u - up));
                    }
                    prev = Some((u, fu));
                }
            }
        }
        GrowthFit { theta: 1.0, delta_star, nu }
    }
}

/// Build the forcing adapters for the bilinear structure. The
/// discontinuous step coalbedo is refused unless explicitly
/// acknowledged, because it breaks the Lipschitz sector condition the
/// qualitative properties rely on.
pub fn budyko_sellers_rhs(
    coalbedo: CoalbedoModel,
    emission: EmissionModel,
    insolation: InsolationProfile,
    coupling: ClimateCoupling,
    acknowledge_discontinuous: bool,
) -> Result<ClimateForcing> {
    coalbedo.validate()?;
    emission.validate()?;
    insolation.validate()?;
    if coalbedo.is_discontinuous() && !acknowledge_discontinuous {
        return Err(Error::Precondition(
            "step coalbedo breaks the Lipschitz condition; pass the acknowledgement flag \
             to use it anyway"
            .into(),
        ));
    }
    Ok(ClimateForcing { coalbedo, emission, insolation, coupling })
}

/// Scenario parameters; defaults reproduce the near-equilibrium present
/// climate run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub coalbedo: CoalbedoModel,
    pub emission: EmissionModel,
    pub insolation: InsolationProfile,
    pub coupling: ClimateCoupling,
    pub acknowledge_discontinuous: bool,
    pub n_cells: usize,
    pub t_final: f64,
    pub dt: f64,
    /// Slabs for sampling time-dependent insolation; 1 suffices for
    /// annual/uniform profiles.
    pub n_slabs: usize,
    pub initial_kelvin: f64,
    pub store_stride: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            coalbedo: CoalbedoModel::default_ramp(),
            emission: EmissionModel::default_linear(),
            insolation: InsolationProfile::default_annual(),
            coupling: ClimateCoupling::StateControl,
            acknowledge_discontinuous: false,
            n_cells: 200,
            t_final: 10.0,
            dt: 1e-3,
            n_slabs: 1,
            initial_kelvin: 288.15,
            store_stride: 100,
        }
    }
}

/// Summary observables of a scenario run.
#[derive(Debug, Clone)]
pub struct ClimateReport {
    pub min_kelvin: f64,
    pub max_kelvin: f64,
    pub mean_initial: f64,
    pub mean_final: f64,
    /// Temperature at the node nearest the equator minus the average of
    /// the two polar endpoint values, at the final time.
    pub pole_equator_gap: f64,
    /// False when the trajectory left [100, 400] K.
    pub in_physical_range: bool,
    pub fitted: GrowthFit,
}

fn weighted_mean(state: &StateVector) -> f64 {
    let w = state.grid().quad_weights();
    let total: f64 = w.iter().sum();
    state.values().iter().zip(w).map(|(u, w)| u * w).sum::<f64>() / total
}

/// Run a scenario on the standard climate operator (diffusion 1 - x^2,
/// weighted Neumann flux conditions) from a uniform initial temperature.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(Trajectory, ClimateReport)> {
    if !config.initial_kelvin.is_finite() || config.initial_kelvin <= 0.0 {
        return Err(Error::Precondition(format!(
            "initial temperature must be positive Kelvin, got {}",
            config.initial_kelvin
        )));
    }
    let forcing = budyko_sellers_rhs(
        config.coalbedo,
        config.emission,
        config.insolation,
        config.coupling,
        config.acknowledge_discontinuous,
    )?;
    let grid = SpatialGrid::new(config.n_cells)?;
    let op = DiscreteOperator::assemble(
        &grid,
        &DiffusionProfile::legendre(),
        &BoundaryCondition::WeightedNeumann,
    )?;
    let n_slabs = if config.insolation.is_time_dependent() { config.n_slabs } else { 1 };
    let control = forcing.control(&grid, config.t_final, n_slabs)?;
    let reaction = forcing.reaction(config.t_final, n_slabs);
    let u0 = StateVector::constant(&grid, config.initial_kelvin);

    let solver = SolverConfig {
        dt: config.dt,
        store_stride: config.store_stride,
        ..SolverConfig::default()
    };
    let traj = solve(&op, &reaction, &control, &u0, &solver)?;

    let min_kelvin = traj.min_over_time();
    let max_kelvin = traj
        .states
        .iter()
        .flat_map(|s| s.values().iter())
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let final_state = traj.states.last().expect("trajectory nonempty");
    let values = final_state.values();
    let equator = values[grid.n_cells() / 2];
    let poles = 0.5 * (values[0] + values[grid.n_nodes() - 1]);
    let report = ClimateReport {
        min_kelvin,
        max_kelvin,
        mean_initial: config.initial_kelvin,
        mean_final: weighted_mean(final_state),
        pole_equator_gap: equator - poles,
        in_physical_range: min_kelvin >= 100.0 && max_kelvin <= 400.0,
        fitted: forcing.fit(config.t_final),
    };
    Ok((traj, report))
}

/// Reference solution of the spatially uniform balance law
/// du/dt = q beta(u) - R(u) by classical fourth-order Runge-Kutta;
/// under x-independent forcing the PDE preserves uniformity, so this
/// scalar integral is an oracle for the full scheme.
pub fn scalar_ode_reference(
    coalbedo: &CoalbedoModel,
    emission: &EmissionModel,
    q: f64,
    u0: f64,
    t_final: f64,
    steps: usize,
) -> f64 {
    let rhs = |u: f64| q * coalbedo.eval(u) - emission.eval(u);
    let n = steps.max(1);
    let dt = t_final / n as f64;
    let mut u = u0;
    for _ in 0..n {
        let k1 = rhs(u);
        let k2 = rhs(u + 0.5 * dt * k1);
        let k3 = rhs(u + 0.5 * dt * k2);
        let k4 = rhs(u + dt * k3);
        u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_saturates_and_interpolates() {
        let c = CoalbedoModel::default_ramp();
        assert_eq!(c.eval(200.0), 0.38);
        assert_eq!(c.eval(300.0), 0.71);
        let mid = c.eval(263.15);
        assert!((mid - 0.5 * (0.38 + 0.71)).abs() < 1e-14, "midpoint {mid}");
    }

    #[test]
    fn coalbedo_kinds_are_monotone_and_bounded() {
        let kinds = [
            CoalbedoModel::default_ramp(),
            CoalbedoModel::BudykoStep { ice: 0.38, warm: 0.71, threshold: 263.15 },
            CoalbedoModel::BudykoRegularized {
                ice: 0.38,
                warm: 0.71,
                threshold: 263.15,
                width: 5.0,
            },
        ];
        for c in kinds {
            c.validate().unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=400 {
                let u = 150.0 + 0.5 * i as f64;
                let b = c.eval(u);
                assert!((0.38..=0.71).contains(&b), "{c:?} out of range at {u}");
                assert!(b >= prev - 1e-15, "{c:?} not monotone at {u}");
                prev = b;
            }
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(CoalbedoModel::SellersRamp { ice: 0.8, warm: 0.7, threshold: 263.0, halfwidth: 5.0 }
            .validate()
            .is_err());
        assert!(EmissionModel::BudykoLinear { intercept: 0.0, slope: -1.0 }.validate().is_err());
        assert!(InsolationProfile::Annual { q: 342.0, p2_coefficient: 1.5 }.validate().is_err());
        assert!(InsolationProfile::Seasonal {
            q: 342.0,
            p2_coefficient: 0.482,
            amplitude: 1.2,
            period: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn gray_body_emission_is_physical_at_reference_temperature() {
        let e = EmissionModel::default_gray_body();
        e.validate().unwrap();
        let r = e.eval(288.0);
        assert!((200.0..280.0).contains(&r), "emission at 288 K is {r} W/m^2");
    }

    #[test]
    fn step_coalbedo_requires_acknowledgement() {
        let step = CoalbedoModel::BudykoStep { ice: 0.38, warm: 0.71, threshold: 263.15 };
        let err = budyko_sellers_rhs(
            step,
            EmissionModel::default_linear(),
            InsolationProfile::default_annual(),
            ClimateCoupling::StateControl,
            false,
        );
        assert!(err.is_err());
        assert!(budyko_sellers_rhs(
            step,
            EmissionModel::default_linear(),
            InsolationProfile::default_annual(),
            ClimateCoupling::StateControl,
            true,
        )
        .is_ok());
    }

    #[test]
    fn couplings_integrate_identical_dynamics() {
        // same dynamics, different implicit/explicit splits: the gap is
        // pure splitting error, first order in dt
        let gap_at = |dt: f64| {
            let mut config = ScenarioConfig {
                n_cells: 64,
                t_final: 0.5,
                dt,
                store_stride: 0,
                ..ScenarioConfig::default()
            };
            let (traj_a, _) = run_scenario(&config).unwrap();
            config.coupling = ClimateCoupling::CoalbedoControl;
            let (traj_b, _) = run_scenario(&config).unwrap();
            let ua = traj_a.states.last().unwrap();
            let ub = traj_b.states.last().unwrap();
            ua.values()
                .iter()
                .zip(ub.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
        };
        let coarse = gap_at(1e-3);
        let fine = gap_at(2e-4);
        assert!(fine < 0.6 * coarse, "gap should shrink with dt: {coarse} -> {fine}");
        assert!(fine < 0.2, "fine-step coupling gap {fine} K");
    }

    #[test]
    fn pure_relaxation_reaches_the_scalar_equilibrium() {
        // warm-saturated coalbedo, R(u) = u, unit forcing: du/dt = warm - u
        let config = ScenarioConfig {
            coalbedo: CoalbedoModel::SellersRamp {
                ice: 0.35,
                warm: 0.71,
                threshold: -10.0,
                halfwidth: 1.0,
            },
            emission: EmissionModel::BudykoLinear { intercept: 0.0, slope: 1.0 },
            insolation: InsolationProfile::Uniform { q: 1.0 },
            n_cells: 48,
            t_final: 10.0,
            initial_kelvin: 300.0,
            store_stride: 0,
            ..ScenarioConfig::default()
        };
        let (_, report) = run_scenario(&config).unwrap();
        assert!(
            (report.mean_final - 0.71).abs() < 0.05,
            "mean {} should approach 0.71",
            report.mean_final
        );
        assert!(report.min_kelvin > 0.0);
        assert!(!report.in_physical_range, "0.71 K is far outside the physical window");
    }

    #[test]
    fn dark_planet_cools_monotonically_toward_linear_equilibrium() {
        let config = ScenarioConfig {
            insolation: InsolationProfile::Uniform { q: 0.0 },
            n_cells: 48,
            t_final: 2.0,
            store_stride: 50,
            ..ScenarioConfig::default()
        };
        let (traj, report) = run_scenario(&config).unwrap();
        let means: Vec<f64> = traj.states.iter().map(weighted_mean).collect();
        for pair in means.windows(2) {
            assert!(pair[1] < pair[0] + 1e-12, "mean not decreasing: {pair:?}");
        }
        // equilibrium of 0 = -intercept - slope u
        let eq = 304.8 / 1.9;
        assert!(report.mean_final > eq && report.mean_final < 288.15);
        assert!(report.min_kelvin > 0.0);
    }

    #[test]
    fn uniform_forcing_matches_scalar_oracle_and_stays_uniform() {
        let config = ScenarioConfig {
            insolation: InsolationProfile::Uniform { q: 342.0 },
            n_cells: 32,
            t_final: 10.0,
            store_stride: 0,
            ..ScenarioConfig::default()
        };
        let (traj, report) = run_scenario(&config).unwrap();
        let last = traj.states.last().unwrap();
        let spread = last.values().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            - last.values().iter().fold(f64::INFINITY, |m, &v| m.min(v));
        assert!(spread <= 1e-6, "uniformity broken: spread {spread}");
        let reference = scalar_ode_reference(
            &config.coalbedo,
            &config.emission,
            342.0,
            288.15,
            10.0,
            200_000,
        );
        assert!(
            (report.mean_final - reference).abs() <= 1e-6,
            "mean {} vs scalar reference {reference}",
            report.mean_final
        );
    }

    #[test]
    fn default_scenario_stays_in_physical_range() {
        let config = ScenarioConfig { n_cells: 100, store_stride: 200, ..ScenarioConfig::default() };
        let (_, report) = run_scenario(&config).unwrap();
        assert!(report.in_physical_range, "range [{}, {}]", report.min_kelvin, report.max_kelvin);
        assert!(report.min_kelvin >= 150.0 && report.max_kelvin <= 350.0);
        assert!(report.pole_equator_gap > 0.0, "equator should be warmer than the poles");
    }

    #[test]
    fn seasonal_means_repeat_per_period_after_transient() {
        let period = 0.5;
        let config = ScenarioConfig {
            insolation: InsolationProfile::Seasonal {
                q: 342.0,
                p2_coefficient: 0.482,
                amplitude: 0.1,
                period,
            },
            n_cells: 48,
            t_final: 3.0,
            n_slabs: 120,
            store_stride: 25,
            ..ScenarioConfig::default()
        };
        let (traj, _) = run_scenario(&config).unwrap();
        let means: Vec<(f64, f64)> =
            traj.times.iter().zip(&traj.states).map(|(&t, s)| (t, weighted_mean(s))).collect();
        let samples_per_period = (period / (config.dt * config.store_stride as f64)).round() as usize;
        let late: Vec<&(f64, f64)> = means.iter().filter(|(t, _)| *t >= 2.0).collect();
        assert!(late.len() > samples_per_period, "need at least one full late period");
        let mut worst = 0.0_f64;
        for i in 0..late.len() - samples_per_period {
            let (_, m1) = late[i];
            let (_, m2) = late[i + samples_per_period];
            worst = worst.max((m1 - m2).abs() / m1.abs());
        }
        assert!(worst < 1e-4, "period-to-period mean drift {worst}");
    }

    #[test]
    fn fitted_bounds_reflect_the_coupling_split() {
        let annual = InsolationProfile::default_annual();
        let remainder = budyko_sellers_rhs(
            CoalbedoModel::default_ramp(),
            EmissionModel::default_linear(),
            annual,
            ClimateCoupling::StateControl,
            false,
        )
        .unwrap();
        let full = budyko_sellers_rhs(
            CoalbedoModel::default_ramp(),
            EmissionModel::default_linear(),
            annual,
            ClimateCoupling::CoalbedoControl,
            false,
        )
        .unwrap();
        let fit_remainder = remainder.fit(1.0);
        let fit_full = full.fit(1.0);
        // the remainder split absorbs -QS u, which dominates and is
        // dissipative; the literal split keeps the ice-line feedback's
        // positive slope
        assert_eq!(fit_remainder.nu, 0.0, "remainder slope {}", fit_remainder.nu);
        assert!(fit_full.nu > 1.0 && fit_full.nu < 10.0, "feedback slope {}", fit_full.nu);
        assert!(fit_remainder.delta_star > fit_full.delta_star);
        assert_eq!(fit_remainder.theta, 1.0);
    }
}
