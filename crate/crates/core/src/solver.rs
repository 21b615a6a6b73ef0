//! Time integration of u_t = (a u_x)_x + alpha(x,t) u + f(x,t,u) with
//! piecewise-static multiplicative controls.
//!
//! The default scheme treats diffusion and the control term implicitly and
//! the reaction explicitly, switching to a damped Newton solve of the fully
//! implicit equation when the reaction becomes stiff on the current step.
//! With the explicit-reaction branch active, the update matrix is an
//! M-matrix whenever dt (||alpha+|| + delta* max|u|^(theta-1)) < 1, so
//! nonnegative data stays nonnegative without any clipping.

use std::sync::Arc;

use crate::control::PiecewiseStaticControl;
use crate::error::{Error, Result};
use crate::grid::StateVector;
use crate::linalg::thomas_solve;
use crate::nonlinearity::Nonlinearity;
use crate::norms::{h1a_seminorm_faces, l2_norm_raw};
use crate::operator::DiscreteOperator;
use crate::trajectory::{StepDiagnostics, Trajectory};

/// Integration scheme. Both treat the stiff linear part implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// First order; unconditionally dissipative and order-preserving.
    ImplicitEulerImex,
    /// Second order in the linear part; can undershoot near sharp decay.
    CrankNicolsonImex,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::ImplicitEulerImex => write!(f, "implicit-euler-imex"),
            Scheme::CrankNicolsonImex => write!(f, "crank-nicolson-imex"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Target step; each slab is stepped with len/ceil(len/dt) so that slab
    /// boundaries are hit exactly.
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    /// Store every k-th state in the trajectory; 0 keeps endpoints only.
    /// Diagnostics are recorded at every step regardless.
    pub store_stride: usize,
    /// Clamp tiny negative values to zero after each step. Off by default:
    /// the scheme preserves nonnegativity on its own inside the M-matrix
    /// step-size regime.
    pub clip_negative: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::ImplicitEulerImex,
            dt: 1e-3,
            newton_tol: 1e-10,
            newton_max_iters: 25,
            store_stride: 0,
            clip_negative: false,
        }
    }
}

impl SolverConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }
}

/// Integrate from t = 0 over the control's full horizon.
pub fn solve(
    op: &DiscreteOperator,
    f: &Nonlinearity,
    control: &PiecewiseStaticControl,
    u0: &StateVector,
    config: &SolverConfig,
) -> Result<Trajectory> {
    u0.check_grid(op.grid())?;
    if control.grid().n_cells() != op.grid().n_cells() {
        return Err(Error::GridMismatch {
            expected: op.grid().n_cells(),
            got: control.grid().n_cells(),
        });
    }
    if !config.dt.is_finite() || config.dt <= 0.0 {
        return Err(Error::Precondition(format!("dt must be positive, got {}", config.dt)));
    }

    let grid = op.grid();
    let nodes = grid.nodes();
    let w = grid.quad_weights();
    let h = grid.spacing();
    let face_a = op.face_values();
    let (m_sub, m_diag, m_sup) = op.bands();
    let n = grid.n_nodes();

    let mut u: Vec<f64> = u0.values().to_vec();
    let mut f_buf = vec![0.0; n];
    let mut sys_sub = vec![0.0; n];
    let mut sys_diag = vec![0.0; n];
    let mut sys_sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    let eval_f = |t: f64, u: &[f64], out: &mut [f64]| {
        for i in 0..u.len() {
            out[i] = f.eval(nodes[i], t, u[i]);
        }
    };

    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut diagnostics = Vec::new();
    eval_f(0.0, &u, &mut f_buf);
    diagnostics.push(StepDiagnostics {
        t: 0.0,
        l2: l2_norm_raw(&u, w),
        h1a_semi: h1a_seminorm_faces(&u, face_a, h),
        min_value: u.iter().cloned().fold(f64::INFINITY, f64::min),
        f_l2: l2_norm_raw(&f_buf, w),
    });

    let breakpoints = control.breakpoints();
    let mut step_counter = 0usize;
    for slab in 0..control.n_slabs() {
        let t_start = breakpoints[slab];
        let t_end = breakpoints[slab + 1];
        let len = t_end - t_start;
        let steps = ((len / config.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = len / steps as f64;
        let alpha = &control.profiles()[slab];

        for j in 0..steps {
            let t_n = t_start + j as f64 * dt;
            let t_next = if j + 1 == steps { t_end } else { t_start + (j + 1) as f64 * dt };

            eval_f(t_n, &u, &mut f_buf);
            let f_l2_at_n = l2_norm_raw(&f_buf, w);

            match config.scheme {
                Scheme::ImplicitEulerImex => {
                    let max_abs = u.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
                    let stiffness = if f.theta() > 1.0 {
                        f.delta_star() * dt * max_abs.powf(f.theta() - 1.0)
                    } else {
                        f.delta_star() * dt
                    };
                    for i in 0..n {
                        sys_sub[i] = -dt * m_sub[i];
                        sys_sup[i] = -dt * m_sup[i];
                        sys_diag[i] = 1.0 - dt * (m_diag[i] + alpha[i]);
                        rhs[i] = u[i] + dt * f_buf[i];
                    }
                    let predictor = thomas_solve(&sys_sub, &sys_diag, &sys_sup, &rhs)?;
                    if stiffness > 0.5 {
                        u = newton_implicit_step(
                            &u, predictor, t_next, dt, m_sub, m_diag, m_sup, alpha, nodes, f,
                            config,
                        )?;
                    } else {
                        u = predictor;
                    }
                }
                Scheme::CrankNicolsonImex => {
                    let half = 0.5 * dt;
                    for i in 0..n {
                        sys_sub[i] = -half * m_sub[i];
                        sys_sup[i] = -half * m_sup[i];
                        sys_diag[i] = 1.0 - half * (m_diag[i] + alpha[i]);
                        let mut mu = m_diag[i] * u[i];
                        if i > 0 {
                            mu += m_sub[i] * u[i - 1];
                        }
                        if i < n - 1 {
                            mu += m_sup[i] * u[i + 1];
                        }
                        rhs[i] = u[i] + half * (mu + alpha[i] * u[i]) + dt * f_buf[i];
                    }
                    u = thomas_solve(&sys_sub, &sys_diag, &sys_sup, &rhs)?;
                }
            }

            if config.clip_negative {
                for v in u.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
                let _ = bad;
                return Err(Error::NonFiniteState(t_next));
            }

            diagnostics.push(StepDiagnostics {
                t: t_next,
                l2: l2_norm_raw(&u, w),
                h1a_semi: h1a_seminorm_faces(&u, face_a, h),
                min_value: u.iter().cloned().fold(f64::INFINITY, f64::min),
                f_l2: f_l2_at_n,
            });

            step_counter += 1;
            let store = config.store_stride > 0 && step_counter.is_multiple_of(config.store_stride);
            let last = slab + 1 == control.n_slabs() && j + 1 == steps;
            if store && !last {
                times.push(t_next);
                states.push(StateVector::new(Arc::clone(grid), u.clone())?);
            }
        }
    }

    times.push(control.horizon());
    states.push(StateVector::new(Arc::clone(grid), u)?);
    Ok(Trajectory { times, states, diagnostics })
}

/// Damped Newton solve of v - dt (Mv + alpha v + f(t1, v)) = u_n, started
/// from the explicit-reaction predictor.
#[allow(clippy::too_many_arguments)]
fn newton_implicit_step(
    u_n: &[f64],
    predictor: Vec<f64>,
    t1: f64,
    dt: f64,
    m_sub: &[f64],
    m_diag: &[f64],
    m_sup: &[f64],
    alpha: &[f64],
    nodes: &[f64],
    f: &Nonlinearity,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let n = u_n.len();
    let mut v = predictor;
    let scale = 1.0 + u_n.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));

    let residual = |v: &[f64], g: &mut [f64]| {
        for i in 0..n {
            let mut mv = m_diag[i] * v[i];
            if i > 0 {
                mv += m_sub[i] * v[i - 1];
            }
            if i < n - 1 {
                mv += m_sup[i] * v[i + 1];
            }
            g[i] = v[i] - dt * (mv + alpha[i] * v[i] + f.eval(nodes[i], t1, v[i])) - u_n[i];
        }
    };

    let mut g = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut sys_sub = vec![0.0; n];
    let mut sys_diag = vec![0.0; n];
    let mut sys_sup = vec![0.0; n];
    residual(&v, &mut g);
    let mut res = g.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));

    for _ in 0..config.newton_max_iters {
        if res <= config.newton_tol * scale {
            return Ok(v);
        }
        for i in 0..n {
            let eps = 1e-6 * (1.0 + v[i].abs());
            let df = (f.eval(nodes[i], t1, v[i] + eps) - f.eval(nodes[i], t1, v[i] - eps))
                / (2.0 * eps);
            sys_sub[i] = -dt * m_sub[i];
            sys_sup[i] = -dt * m_sup[i];
            sys_diag[i] = 1.0 - dt * (m_diag[i] + alpha[i] + df);
        }
        let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let delta = thomas_solve(&sys_sub, &sys_diag, &sys_sup, &neg_g)?;

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            residual(&trial, &mut g_trial);
            let trial_res = g_trial.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
            if trial_res.is_finite() && trial_res < (1.0 - 1e-4 * lambda) * res {
                v = trial;
                std::mem::swap(&mut g, &mut g_trial);
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= config.newton_tol * scale {
        Ok(v)
    } else {
        Err(Error::NewtonDiverged { t: t1, residual: res })
    }
}

/// Errors and observed orders against the finest run in a refinement
/// sequence.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// h or dt for each non-reference run
    pub parameters: Vec<f64>,
    /// error of each non-reference run against the finest
    pub errors: Vec<f64>,
    /// observed order between consecutive runs
    pub rates: Vec<f64>,
}

impl ConvergenceReport {
    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }
}

/// Spatial self-convergence: run the same problem on nested grids with a
/// shared small step and compare final states on shared nodes against the
/// finest run. Each resolution must divide the finest one.
#[allow(clippy::too_many_arguments)]
pub fn spatial_convergence_study(
    profile: &crate::diffusion::DiffusionProfile,
    bc: &crate::boundary::BoundaryCondition,
    f: &Nonlinearity,
    u0_fn: &dyn Fn(f64) -> f64,
    alpha_fn: &dyn Fn(f64) -> f64,
    t_final: f64,
    dt: f64,
    resolutions: &[usize],
    scheme: Scheme,
) -> Result<ConvergenceReport> {
    if resolutions.len() < 3 {
        return Err(Error::Precondition("need at least three resolutions".into()));
    }
    let finest = *resolutions.last().expect("nonempty");
    let mut finals = Vec::new();
    for &n in resolutions {
        if !finest.is_multiple_of(n) {
            return Err(Error::Precondition(format!(
                "resolution {n} does not divide the finest {finest}"
            )));
        }
        let grid = crate::grid::SpatialGrid::new(n)?;
        let op = DiscreteOperator::assemble(&grid, profile, bc)?;
        let alpha: Vec<f64> = grid.nodes().iter().map(|&x| alpha_fn(x)).collect();
        let control = PiecewiseStaticControl::new(
            Arc::clone(&grid),
            vec![0.0, t_final],
            vec![alpha],
        )?;
        let u0 = StateVector::from_fn(&grid, u0_fn);
        let config = SolverConfig { scheme, dt, ..SolverConfig::default() };
        let traj = solve(&op, f, &control, &u0, &config)?;
        finals.push(traj.states.last().expect("trajectory nonempty").clone());
    }

    let reference = finals.last().expect("nonempty");
    let mut parameters = Vec::new();
    let mut errors = Vec::new();
    for (idx, u) in finals[..finals.len() - 1].iter().enumerate() {
        let n = resolutions[idx];
        let ratio = finest / n;
        let w = u.grid().quad_weights();
        let mut acc = 0.0;
        for (j, (&wj, &uj)) in w.iter().zip(u.values()).enumerate() {
            let d = uj - reference.values()[j * ratio];
            acc += wj * d * d;
        }
        parameters.push(2.0 / n as f64);
        errors.push(acc.sqrt());
    }
    let rates = observed_rates(&parameters, &errors);
    Ok(ConvergenceReport { parameters, errors, rates })
}

/// Temporal self-convergence on a fixed grid: shrink dt toward the last
/// (reference) value and compare final states in the full weighted norm.
#[allow(clippy::too_many_arguments)]
pub fn temporal_convergence_study(
    profile: &crate::diffusion::DiffusionProfile,
    bc: &crate::boundary::BoundaryCondition,
    f: &Nonlinearity,
    u0_fn: &dyn Fn(f64) -> f64,
    alpha_fn: &dyn Fn(f64) -> f64,
    t_final: f64,
    n: usize,
    dts: &[f64],
    scheme: Scheme,
) -> Result<ConvergenceReport> {
    if dts.len() < 3 {
        return Err(Error::Precondition("need at least three step sizes".into()));
    }
    let grid = crate::grid::SpatialGrid::new(n)?;
    let op = DiscreteOperator::assemble(&grid, profile, bc)?;
    let alpha: Vec<f64> = grid.nodes().iter().map(|&x| alpha_fn(x)).collect();
    let control =
        PiecewiseStaticControl::new(Arc::clone(&grid), vec![0.0, t_final], vec![alpha])?;
    let u0 = StateVector::from_fn(&grid, u0_fn);

    let mut finals = Vec::new();
    for &dt in dts {
        let config = SolverConfig { scheme, dt, ..SolverConfig::default() };
        let traj = solve(&op, f, &control, &u0, &config)?;
        finals.push(traj.states.last().expect("trajectory nonempty").clone());
    }
    let reference = finals.last().expect("nonempty");
    let mut errors = Vec::new();
    for u in &finals[..finals.len() - 1] {
        errors.push(crate::norms::l2_norm(&u.sub(reference)?));
    }
    let parameters: Vec<f64> = dts[..dts.len() - 1].to_vec();
    let rates = observed_rates(&parameters, &errors);
    Ok(ConvergenceReport { parameters, errors, rates })
}

fn observed_rates(parameters: &[f64], errors: &[f64]) -> Vec<f64> {
    let mut rates = Vec::new();
    for k in 0..errors.len().saturating_sub(1) {
        let ratio = parameters[k] / parameters[k + 1];
        if errors[k + 1] > 0.0 && ratio > 1.0 {
            rates.push((errors[k] / errors[k + 1]).ln() / ratio.ln());
        }
    }
    rates
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryCondition;
    use crate::diffusion::DiffusionProfile;
    use crate::grid::SpatialGrid;
    use crate::norms::{l2_norm, mass};

    fn setup(n: usize) -> (Arc<SpatialGrid>, DiscreteOperator) {
        let grid = SpatialGrid::new(n).unwrap();
        let op = DiscreteOperator::assemble(
            &grid,
            &DiffusionProfile::legendre(),
            &BoundaryCondition::WeightedNeumann,
        )
        .unwrap();
        (grid, op)
    }

    #[test]
    fn pure_scalar_growth_matches_exponential() {
        // constant state with alpha = 0.8 and no reaction: u(t) = e^{0.8 t}
        let (grid, op) = setup(64);
        let control = PiecewiseStaticControl::constant(&grid, 0.8, 0.5).unwrap();
        let u0 = StateVector::constant(&grid, 1.0);
        let config = SolverConfig::with_dt(1e-5);
        let traj = solve(&op, &Nonlinearity::zero(), &control, &u0, &config).unwrap();
        let expect = (0.8_f64 * 0.5).exp();
        let got = traj.final_state().values()[30];
        assert!((got - expect).abs() < 1e-4 * expect, "{got} vs {expect}");
    }

    #[test]
    fn mode_decay_matches_rate() {
        let (grid, op) = setup(400);
        let basis = crate::spectral::eigendecompose(&op, 3).unwrap();
        let lam = basis.eigenvalues()[2];
        let u0 = basis.mode_state(2);
        let control = PiecewiseStaticControl::zero(&grid, 0.1).unwrap();
        let config = SolverConfig::with_dt(2e-5);
        let traj = solve(&op, &Nonlinearity::zero(), &control, &u0, &config).unwrap();
        let expect = (-lam * 0.1_f64).exp();
        let got = l2_norm(traj.final_state());
        assert!((got - expect).abs() < 2e-3 * expect, "{got} vs {expect}");
    }

    #[test]
    fn nonnegativity_preserved_without_clipping() {
        let (grid, op) = setup(200);
        let u0 = StateVector::from_fn(&grid, |x| (1.0 + (3.0 * x).sin()).max(0.0));
        let alpha: Vec<f64> = grid.nodes().iter().map(|&x| 2.0 * (5.0 * x).cos()).collect();
        let control =
            PiecewiseStaticControl::new(Arc::clone(&grid), vec![0.0, 0.4], vec![alpha]).unwrap();
        let f = Nonlinearity::power_decay(0.8, 2.0).unwrap();
        let config = SolverConfig::with_dt(5e-4);
        let traj = solve(&op, &f, &control, &u0, &config).unwrap();
        assert!(traj.min_over_time() >= -1e-12, "min {}", traj.min_over_time());
    }

    #[test]
    fn mass_conserved_in_pure_diffusion() {
        let (grid, op) = setup(300);
        let u0 = StateVector::from_fn(&grid, |x| 1.0 + 0.5 * (2.0 * x).cos());
        let control = PiecewiseStaticControl::zero(&grid, 0.3).unwrap();
        let config = SolverConfig::with_dt(1e-3);
        let traj = solve(&op, &Nonlinearity::zero(), &control, &u0, &config).unwrap();
        let drift = (mass(traj.final_state()) - mass(&u0)).abs();
        assert!(drift < 1e-10 * mass(&u0).abs(), "drift {drift}");
    }

    #[test]
    fn newton_branch_handles_stiff_reaction() {
        // strong cubic decay forces the implicit-reaction path
        let (grid, op) = setup(100);
        let u0 = StateVector::constant(&grid, 2.0);
        let control = PiecewiseStaticControl::zero(&grid, 0.05).unwrap();
        let f = Nonlinearity::power_decay(40.0, 3.0).unwrap();
        let config = SolverConfig::with_dt(1e-2);
        let traj = solve(&op, &f, &control, &u0, &config).unwrap();
        assert!(traj.final_state().max_abs() < 2.0);
        assert!(traj.min_over_time() >= 0.0);
    }

    #[test]
    fn crank_nicolson_beats_euler_on_linear_decay() {
        let (grid, op) = setup(200);
        let basis = crate::spectral::eigendecompose(&op, 2).unwrap();
        let u0 = basis.mode_state(1);
        let lam = basis.eigenvalues()[1];
        let control = PiecewiseStaticControl::zero(&grid, 0.2).unwrap();
        let exact = (-lam * 0.2_f64).exp();
        let run = |scheme: Scheme| {
            let config = SolverConfig { scheme, dt: 5e-3, ..SolverConfig::default() };
            let traj = solve(&op, &Nonlinearity::zero(), &control, &u0, &config).unwrap();
            (l2_norm(traj.final_state()) - exact).abs()
        };
        let e_ie = run(Scheme::ImplicitEulerImex);
        let e_cn = run(Scheme::CrankNicolsonImex);
        assert!(e_cn < 0.2 * e_ie, "cn {e_cn} vs ie {e_ie}");
    }

    #[test]
    fn breakpoints_are_hit_exactly() {
        let (grid, op) = setup(64);
        let profiles = vec![vec![0.3; grid.n_nodes()], vec![-0.2; grid.n_nodes()]];
        let control = PiecewiseStaticControl::new(
            Arc::clone(&grid),
            vec![0.0, 0.31, 0.55],
            profiles,
        )
        .unwrap();
        let u0 = StateVector::constant(&grid, 1.0);
        let config = SolverConfig { dt: 1e-2, store_stride: 1, ..SolverConfig::default() };
        let traj = solve(&op, &Nonlinearity::zero(), &control, &u0, &config).unwrap();
        assert!(traj.diagnostics.iter().any(|d| (d.t - 0.31).abs() < 1e-14));
        assert!((traj.final_time() - 0.55).abs() < 1e-14);
    }

    #[test]
    fn temporal_order_is_first_for_implicit_euler() {
        let f = Nonlinearity::power_decay(0.5, 2.0).unwrap();
        let report = temporal_convergence_study(
            &DiffusionProfile::legendre(),
            &BoundaryCondition::WeightedNeumann,
            &f,
            &|x| 1.0 + 0.3 * (2.0 * x).cos(),
            &|x| 0.5 * x,
            0.2,
            128,
            &[4e-3, 2e-3, 1e-3, 2.5e-4],
            Scheme::ImplicitEulerImex,
        )
        .unwrap();
        let rate = report.mean_rate();
        assert!((0.7..=1.3).contains(&rate), "temporal rate {rate}");
    }

    #[test]
    fn spatial_order_is_second() {
        let f = Nonlinearity::power_decay(0.5, 2.0).unwrap();
        let report = spatial_convergence_study(
            &DiffusionProfile::legendre(),
            &BoundaryCondition::WeightedNeumann,
            &f,
            &|x| 1.0 + 0.3 * (2.0 * x).cos(),
            &|x| 0.5 * x,
            0.1,
            2e-5,
            &[32, 64, 128, 256],
            Scheme::ImplicitEulerImex,
        )
        .unwrap();
        let rate = report.mean_rate();
        assert!((1.8..=2.2).contains(&rate), "spatial rate {rate}");
    }
}
