//! The built-in acceptance suite: ten numbered criteria covering the
//! spectral oracle, decay rates, qualitative property suites, end-to-end
//! steering, design-identity exactness, conservation, the climate
//! preset, and convergence orders. Each criterion runs standalone,
//! measures its own wall time, and enforces any stated runtime budget as
//! part of its pass/fail verdict, so the suite doubles as a performance
//! regression gate.
//!
//! The same runners back both the `selftest` command and the acceptance
//! integration test.

use std::sync::Arc;
use std::time::Instant;

use crate::boundary::BoundaryCondition;
use crate::climate::{self, InsolationProfile, ScenarioConfig};
use crate::control::PiecewiseStaticControl;
use crate::diffusion::DiffusionProfile;
use crate::error::Result;
use crate::grid::{SpatialGrid, StateVector};
use crate::nonlinearity::Nonlinearity;
use crate::norms::l2_norm;
use crate::operator::DiscreteOperator;
use crate::solver::{
    solve, spatial_convergence_study, temporal_convergence_study, Scheme, SolverConfig,
};
use crate::spectral::eigendecompose;
use crate::synthesis::{synthesize, verify_plan, SynthesisConfig};
use crate::verification::{
    continuous_dependence_suite, mass_conservation_drift, nonnegativity_suite,
    uniform_negative_suite, SuiteConfig,
};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub runtime_seconds: f64,
    pub detail: String,
}

impl CriterionResult {
    /// One-line pass/fail summary.
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:2} {:<24} {} ({:7.2}s)  {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.runtime_seconds,
            self.detail
        )
    }
}

fn run_timed(
    id: usize,
    name: &'static str,
    budget_seconds: Option<f64>,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let start = Instant::now();
    let outcome = body();
    let runtime_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((mut pass, mut detail)) => {
            if let Some(budget) = budget_seconds {
                if runtime_seconds >= budget {
                    pass = false;
                    detail = format!("{detail}; runtime {runtime_seconds:.1}s over budget {budget}s");
                }
            }
            CriterionResult { id, name, pass, runtime_seconds, detail }
        }
        Err(e) => CriterionResult {
            id,
            name,
            pass: false,
            runtime_seconds,
            detail: format!("error: {e}"),
        },
    }
}

/// Run every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    (1..=10).map(run_criterion).collect()
}

/// Run one criterion by its 1-based number; unknown ids fail.
pub fn run_criterion(id: usize) -> CriterionResult {
    match id {
        1 => run_timed(1, "spectrum-oracle", Some(10.0), criterion_spectrum),
        2 => run_timed(2, "eigen-decay", Some(120.0), criterion_eigen_decay),
        3 => run_timed(3, "nonnegativity-suite", Some(300.0), criterion_nonnegativity),
        4 => run_timed(4, "continuous-dependence", None, criterion_continuous_dependence),
        5 => run_timed(5, "steering-end-to-end", None, criterion_steering),
        6 => run_timed(6, "long-horizon-steering", None, criterion_long_horizon),
        7 => run_timed(7, "profile-exactness", None, criterion_profile_exactness),
        8 => run_timed(8, "mass-conservation", None, criterion_mass_conservation),
        9 => run_timed(9, "climate-sanity", None, criterion_climate),
        10 => run_timed(10, "convergence-orders", None, criterion_convergence_orders),
        other => CriterionResult {
            id: other,
            name: "unknown",
            pass: false,
            runtime_seconds: 0.0,
            detail: format!("no criterion numbered {other}; valid ids are 1..=10"),
        },
    }
}

fn legendre_operator(n: usize) -> Result<(Arc<SpatialGrid>, DiscreteOperator)> {
    let grid = SpatialGrid::new(n)?;
    let op = DiscreteOperator::assemble(
        &grid,
        &DiffusionProfile::legendre(),
        &BoundaryCondition::WeightedNeumann,
    )?;
    Ok((grid, op))
}

/// Low eigenvalues of the 1 - x^2 operator must match p (p + 1).
fn criterion_spectrum() -> Result<(bool, String)> {
    let (_, op) = legendre_operator(4000)?;
    let basis = eigendecompose(&op, 11)?;
    let lambda0 = basis.eigenvalues()[0].abs();
    let mut worst_rel = 0.0_f64;
    for p in 1..=10 {
        let exact = (p * (p + 1)) as f64;
        worst_rel = worst_rel.max((basis.eigenvalues()[p] / exact - 1.0).abs());
    }
    let pass = lambda0 <= 1e-8 && worst_rel <= 1e-3;
    Ok((pass, format!("|lambda_0| = {lambda0:.2e}, worst relative offset {worst_rel:.2e}")))
}

/// Uncontrolled evolution of each low mode decays at exactly its rate.
fn criterion_eigen_decay() -> Result<(bool, String)> {
    let (grid, op) = legendre_operator(2000)?;
    let basis = eigendecompose(&op, 4)?;
    let t_final = 0.5;
    let control = PiecewiseStaticControl::zero(&grid, t_final)?;
    let config = SolverConfig::with_dt(1e-4);
    let mut worst = 0.0_f64;
    let mut worst_case_seconds = 0.0_f64;
    for p in 0..=3 {
        let start = Instant::now();
        let u0 = basis.mode_state(p);
        let traj = solve(&op, &Nonlinearity::zero(), &control, &u0, &config)?;
        let rate = (p * (p + 1)) as f64;
        let expected = u0.scale((-rate * t_final).exp());
        worst = worst.max(l2_norm(&traj.final_state().sub(&expected)?));
        worst_case_seconds = worst_case_seconds.max(start.elapsed().as_secs_f64());
    }
    let pass = worst <= 1e-3 && worst_case_seconds < 30.0;
    Ok((pass, format!("worst mode error {worst:.2e}, slowest case {worst_case_seconds:.2}s")))
}

/// Fifty seeded random cases stay above the negativity floor.
fn criterion_nonnegativity() -> Result<(bool, String)> {
    let (_, op) = legendre_operator(200)?;
    let config = SuiteConfig { n_cases: 50, t_final: 1.0, ..SuiteConfig::default() };
    let report = nonnegativity_suite(&op, &config)?;
    Ok((
        report.all_pass,
        format!("{} cases, worst relative slack {:.3}", report.checks.len(), report.worst_margin),
    ))
}

/// Twenty seeded pairs obey the growth bound; nonpositive-control cases
/// obey the uniform sqrt(2) bound on short horizons.
fn criterion_continuous_dependence() -> Result<(bool, String)> {
    let (_, op) = legendre_operator(200)?;
    let pair_config = SuiteConfig { n_cases: 20, t_final: 0.5, ..SuiteConfig::default() };
    let pairs = continuous_dependence_suite(&op, &pair_config)?;
    let neg_config = SuiteConfig { n_cases: 12, t_final: 0.07, ..SuiteConfig::default() };
    let negative = uniform_negative_suite(&op, &neg_config)?;
    let pass =
        pairs.all_pass && negative.all_pass && negative.n_applicable == neg_config.n_cases;
    Ok((
        pass,
        format!(
            "growth slack {:.3}, uniform-bound slack {:.3} ({} applicable)",
            pairs.worst_margin, negative.worst_margin, negative.n_applicable
        ),
    ))
}

struct SteeringProblem {
    profile: DiffusionProfile,
    bc: BoundaryCondition,
    f: Nonlinearity,
    tag: &'static str,
}

fn steering_problems() -> Result<Vec<SteeringProblem>> {
    Ok(vec![
        SteeringProblem {
            profile: DiffusionProfile::legendre(),
            bc: BoundaryCondition::WeightedNeumann,
            f: Nonlinearity::power_decay(0.1, 3.0)?,
            tag: "strongly-degenerate",
        },
        SteeringProblem {
            profile: DiffusionProfile::sqrt_profile(),
            bc: BoundaryCondition::robin(1.0, -1.0, 1.0, 1.0)?,
            f: Nonlinearity::zero(),
            tag: "weakly-degenerate-robin",
        },
    ])
}

fn steering_states(grid: &Arc<SpatialGrid>) -> (StateVector, StateVector, f64) {
    let u0 = StateVector::from_fn(grid, |x| 1.0 + (std::f64::consts::PI * x).cos());
    let target = StateVector::from_fn(grid, |x| 2.0 * (-4.0 * x * x).exp());
    let epsilon = 0.05 * l2_norm(&target);
    (u0, target, epsilon)
}

/// Steer both canonical problems to the Gaussian target at two horizons,
/// then re-run the plan to confirm the terminal claim.
fn criterion_steering() -> Result<(bool, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for problem in steering_problems()? {
        let grid = SpatialGrid::new(1000)?;
        let op = DiscreteOperator::assemble(&grid, &problem.profile, &problem.bc)?;
        let (u0, target, epsilon) = steering_states(&grid);
        for t_final in [0.2, 1.0] {
            let start = Instant::now();
            let plan = synthesize(
                &op,
                &problem.profile,
                &problem.f,
                &u0,
                &target,
                epsilon,
                t_final,
                &SynthesisConfig::default(),
            )?;
            let check = verify_plan(&plan, &problem.profile, &problem.bc, &problem.f, None, 1.0)?;
            let elapsed = start.elapsed().as_secs_f64();
            let ok = plan.terminal_error < epsilon && check.pass && elapsed < 120.0;
            pass &= ok;
            parts.push(format!(
                "{} T={t_final}: err {:.4} (eps {:.4}, {:.1}s)",
                problem.tag, check.terminal_error, epsilon, elapsed
            ));
        }
    }
    Ok((pass, parts.join("; ")))
}

/// The same steering succeeds at a five-unit horizon by parking first.
fn criterion_long_horizon() -> Result<(bool, String)> {
    let problem = &steering_problems()?[0];
    let grid = SpatialGrid::new(1000)?;
    let op = DiscreteOperator::assemble(&grid, &problem.profile, &problem.bc)?;
    let (u0, target, epsilon) = steering_states(&grid);
    let plan = synthesize(
        &op,
        &problem.profile,
        &problem.f,
        &u0,
        &target,
        epsilon,
        5.0,
        &SynthesisConfig::default(),
    )?;
    let check = verify_plan(&plan, &problem.profile, &problem.bc, &problem.f, None, 1.0)?;
    let pass = plan.terminal_error < epsilon && check.pass && (plan.horizon() - 5.0).abs() == 0.0;
    Ok((
        pass,
        format!(
            "terminal {:.4} (eps {:.4}), {} slabs with {:.2} units parked",
            check.terminal_error,
            epsilon,
            plan.n_slabs(),
            plan.trace.t_park
        ),
    ))
}

/// The shaping design identity holds to near machine precision on the
/// window core.
fn criterion_profile_exactness() -> Result<(bool, String)> {
    let problem = &steering_problems()?[0];
    let grid = SpatialGrid::new(500)?;
    let op = DiscreteOperator::assemble(&grid, &problem.profile, &problem.bc)?;
    let (u0, target, _) = steering_states(&grid);
    let epsilon = 0.08 * l2_norm(&target);
    let plan = synthesize(
        &op,
        &problem.profile,
        &problem.f,
        &u0,
        &target,
        epsilon,
        0.2,
        &SynthesisConfig::default(),
    )?;
    let defect = plan.design.design_identity_max_error();
    let core_nodes = plan.design.window.iter().filter(|&&w| w >= 1.0).count();
    Ok((defect <= 1e-12, format!("max defect {defect:.2e} over {core_nodes} core nodes")))
}

/// Flux-form conservation under weighted Neumann conditions.
fn criterion_mass_conservation() -> Result<(bool, String)> {
    let (grid, op) = legendre_operator(500)?;
    let u0 = StateVector::from_fn(&grid, |x| 1.0 + (std::f64::consts::PI * x).cos());
    let drift = mass_conservation_drift(&op, &u0, 1.0, 1e-3)?;
    Ok((drift <= 1e-8, format!("relative mass drift {drift:.2e}")))
}

/// The default climate scenario stays physical, and uniform forcing
/// reproduces the scalar balance law.
fn criterion_climate() -> Result<(bool, String)> {
    let default_config = ScenarioConfig { store_stride: 200, ..ScenarioConfig::default() };
    let (_, report) = climate::run_scenario(&default_config)?;
    let range_ok = report.min_kelvin >= 150.0 && report.max_kelvin <= 350.0;

    let uniform_config = ScenarioConfig {
        insolation: InsolationProfile::Uniform { q: 342.0 },
        n_cells: 32,
        store_stride: 0,
        ..ScenarioConfig::default()
    };
    let (traj, uniform_report) = climate::run_scenario(&uniform_config)?;
    let last = traj.states.last().expect("trajectory nonempty");
    let spread = last.values().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - last.values().iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let reference = climate::scalar_ode_reference(
        &uniform_config.coalbedo,
        &uniform_config.emission,
        342.0,
        uniform_config.initial_kelvin,
        uniform_config.t_final,
        200_000,
    );
    let oracle_gap = (uniform_report.mean_final - reference).abs();
    let uniform_ok = spread <= 1e-6 && oracle_gap <= 1e-6;
    Ok((
        range_ok && uniform_ok,
        format!(
            "range [{:.1}, {:.1}] K; uniform spread {spread:.1e}, scalar-oracle gap {oracle_gap:.1e}",
            report.min_kelvin, report.max_kelvin
        ),
    ))
}

/// Observed spatial and temporal convergence orders on a smooth decaying
/// problem.
fn criterion_convergence_orders() -> Result<(bool, String)> {
    let f = Nonlinearity::power_decay(0.5, 2.0)?;
    let u0 = |x: f64| 1.0 + 0.3 * (2.0 * x).cos();
    let alpha = |x: f64| 0.5 * x;
    let spatial = spatial_convergence_study(
        &DiffusionProfile::legendre(),
        &BoundaryCondition::WeightedNeumann,
        &f,
        &u0,
        &alpha,
        0.1,
        2e-5,
        &[32, 64, 128, 256],
        Scheme::ImplicitEulerImex,
    )?;
    let temporal = temporal_convergence_study(
        &DiffusionProfile::legendre(),
        &BoundaryCondition::WeightedNeumann,
        &f,
        &u0,
        &alpha,
        0.2,
        128,
        &[4e-3, 2e-3, 1e-3, 2.5e-4],
        Scheme::ImplicitEulerImex,
    )?;
    let s = spatial.mean_rate();
    let t = temporal.mean_rate();
    let pass = (1.8..=2.2).contains(&s) && (0.7..=1.3).contains(&t);
    Ok((pass, format!("spatial order {s:.2}, temporal order {t:.2}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_criterion_fails_gracefully() {
        let r = run_criterion(11);
        assert!(!r.pass);
        assert!(r.detail.contains("1..=10"));
    }

    #[test]
    fn summary_line_mentions_verdict() {
        let r = CriterionResult {
            id: 3,
            name: "demo",
            pass: true,
            runtime_seconds: 1.25,
            detail: "ok".into(),
        };
        assert!(r.summary_line().contains("PASS"));
        assert!(r.summary_line().contains("demo"));
    }
}
