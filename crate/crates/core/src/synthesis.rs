//! Synthesis of piecewise-static multiplicative control schedules that
//! steer a nonnegative state to a neighborhood of a nonnegative target in
//! the weighted L2 norm, keeping the state nonnegative throughout.
//!
//! A schedule has up to four static slabs:
//!
//! * an optional parking slab with no control, spending surplus horizon;
//! * a collar slab whose profile is strongly negative on a thin band just
//!   inside each endpoint (and zero at the endpoints themselves, rising
//!   over a resolvable margin): it drains the boundary strip that later
//!   shaping is not allowed to touch, because admissible profiles must
//!   vanish flatly at the degenerate endpoints;
//! * a short expansion slab with a large constant profile that multiplies
//!   the state by a strict majorant S of the target/state ratio;
//! * a short shaping slab whose profile is the pointwise log ratio
//!   between the (adjusted) target and the expanded state, windowed to
//!   vanish at the endpoints.
//!
//! On nodes where the shaping window equals one, exp(profile) * S * state
//! equals the adjusted target exactly by construction. The target is
//! adjusted pointwise to min(target, S * state), which only acts inside
//! the drained boundary band where the target is attainable from below;
//! its cost is measured and charged against the accuracy budget. Every
//! other error source (smoothing distances, the expansion residual, time
//! discretization, the terminal error) is sized from operator bounds
//! first and then measured on simulation, retrying over a short ladder of
//! collar geometries and slab durations until the measured gates pass.

use std::sync::Arc;

use crate::boundary::BoundaryCondition;
use crate::control::PiecewiseStaticControl;
use crate::diffusion::DiffusionProfile;
use crate::error::{Error, Result};
use crate::grid::{resample_linear, SpatialGrid, StateVector};
use crate::nonlinearity::Nonlinearity;
use crate::norms::{l2_norm, l2_norm_raw};
use crate::operator::DiscreteOperator;
use crate::smoothing::{positive_smooth_approx, smoothstep, window_profile};
use crate::solver::{solve, SolverConfig};

/// Fraction budgets, relative to the requested accuracy epsilon.
const SIGMA_FRACTION: f64 = std::f64::consts::SQRT_2 / 12.0;
const SMOOTHING_FRACTION: f64 = std::f64::consts::SQRT_2 / 36.0;
const SHAPE_CORE_FRACTION: f64 = 1.0 / 12.0;
const TARGET_SMOOTHING_FRACTION: f64 = 0.25;

/// One retry setting: collar band width (cells), drain strength, and a
/// multiplier on the shaping-slab duration.
#[derive(Debug, Clone, Copy)]
pub struct DrainSetting {
    pub plateau_cells: f64,
    pub drain_rate: f64,
    pub shape_time_factor: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    /// Length of the active tail (collar + expansion + shaping); horizon
    /// beyond this is spent in the parking slab.
    pub tail_duration: f64,
    /// Margin (in cells) over which control profiles rise from zero at
    /// the endpoints; must span the flatness sampling stencil.
    pub margin_cells: f64,
    /// Retry ladder over collar geometry and shaping duration.
    pub attempts: Vec<DrainSetting>,
    /// Window flattening orders tried while the endpoint flatness check
    /// fails.
    pub window_orders: Vec<u32>,
    /// Base step counts for the active slabs (refined adaptively).
    pub steps_per_active_slab: usize,
    /// Base step target for parking slabs.
    pub park_dt: f64,
    /// Base step target for the collar slab.
    pub collar_dt: f64,
    /// Halvings of the expansion duration while its residual gate fails.
    pub expansion_retries: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            tail_duration: 0.2,
            margin_cells: 6.5,
            attempts: vec![
                DrainSetting { plateau_cells: 20.0, drain_rate: 2400.0, shape_time_factor: 1.0 },
                DrainSetting { plateau_cells: 40.0, drain_rate: 1200.0, shape_time_factor: 1.0 },
                DrainSetting { plateau_cells: 10.0, drain_rate: 2400.0, shape_time_factor: 1.0 },
                DrainSetting { plateau_cells: 20.0, drain_rate: 2400.0, shape_time_factor: 0.5 },
                DrainSetting { plateau_cells: 40.0, drain_rate: 2400.0, shape_time_factor: 1.0 },
                DrainSetting { plateau_cells: 40.0, drain_rate: 1200.0, shape_time_factor: 0.5 },
                DrainSetting { plateau_cells: 20.0, drain_rate: 600.0, shape_time_factor: 2.0 },
                DrainSetting { plateau_cells: 10.0, drain_rate: 2400.0, shape_time_factor: 2.0 },
            ],
            window_orders: vec![1, 2, 4, 8],
            steps_per_active_slab: 200,
            park_dt: 1e-3,
            collar_dt: 2e-4,
            expansion_retries: 3,
        }
    }
}

/// Measured budgets for a synthesized schedule.
#[derive(Debug, Clone)]
pub struct BudgetTrace {
    pub t_park: f64,
    pub t_collar: f64,
    pub t_expand: f64,
    pub t_shape: f64,
    pub plateau_cells: f64,
    pub drain_rate: f64,
    pub scale_factor: f64,
    pub smoothing_budget: f64,
    pub smoothing_error: f64,
    pub target_adjustment: f64,
    pub sigma_budget: f64,
    pub sigma_measured: f64,
    pub shape_core_budget: f64,
    pub shape_core_error: f64,
    pub window_order: u32,
    pub shape_margin: f64,
    pub terminal_error: f64,
    pub min_state: f64,
}

/// One static slab: duration, nodal control profile, suggested step.
#[derive(Debug, Clone)]
pub struct Slab {
    pub duration: f64,
    pub profile: Vec<f64>,
    pub dt: f64,
}

/// The algebraic data behind the shaping slab: on nodes where the window
/// equals one, exp(alpha) * scale * state equals the adjusted target by
/// construction, and `design_identity_max_error` audits that claim.
#[derive(Debug, Clone)]
pub struct ShapeDesign {
    /// Integrated shaping exponent (slab profile times its duration).
    pub alpha: Vec<f64>,
    /// Expansion factor applied before shaping.
    pub scale: f64,
    /// Smoothed positive state entering the expansion slab.
    pub state: Vec<f64>,
    /// Smoothed target after the pointwise attainability adjustment.
    pub target: Vec<f64>,
    /// Endpoint cutoff window applied to the shaping exponent.
    pub window: Vec<f64>,
}

impl ShapeDesign {
    /// Max pointwise defect of exp(alpha) * scale * state against the
    /// target over the nodes where the window equals one.
    pub fn design_identity_max_error(&self) -> f64 {
        self.alpha
            .iter()
            .zip(&self.state)
            .zip(&self.target)
            .zip(&self.window)
            .filter(|(_, &w)| w >= 1.0)
            .map(|(((a, v), t), _)| (a.exp() * self.scale * v - t).abs())
            .fold(0.0_f64, f64::max)
    }
}

/// A complete synthesized schedule with the data needed to replay and
/// check it.
#[derive(Clone)]
pub struct ControlPlan {
    pub control: PiecewiseStaticControl,
    pub dt_hints: Vec<f64>,
    pub epsilon: f64,
    pub initial: StateVector,
    pub target: StateVector,
    pub terminal_error: f64,
    pub trace: BudgetTrace,
    pub design: ShapeDesign,
}

impl ControlPlan {
    pub fn horizon(&self) -> f64 {
        self.control.horizon()
    }

    pub fn n_slabs(&self) -> usize {
        self.control.n_slabs()
    }
}

/// Steer `u0` to within `epsilon` of `target` (weighted L2) at exactly
/// `t_final`, producing the control schedule and its budget audit.
#[allow(clippy::too_many_arguments)]
pub fn synthesize(
    op: &DiscreteOperator,
    profile: &DiffusionProfile,
    f: &Nonlinearity,
    u0: &StateVector,
    target: &StateVector,
    epsilon: f64,
    t_final: f64,
    config: &SynthesisConfig,
) -> Result<ControlPlan> {
    u0.check_grid(op.grid())?;
    target.check_grid(op.grid())?;
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    if !t_final.is_finite() || t_final <= 0.0 {
        return Err(Error::Precondition(format!("horizon must be positive, got {t_final}")));
    }
    if u0.min_value() < -1e-12 * u0.max_abs().max(1.0) {
        return Err(Error::Precondition(
            "initial state must be nonnegative for nonnegative steering".into(),
        ));
    }
    if l2_norm(u0) == 0.0 {
        return Err(Error::Precondition(
            "multiplicative controls cannot move the zero state".into(),
        ));
    }
    if target.min_value() < -1e-12 * target.max_abs().max(1.0) {
        return Err(Error::Precondition("target must be nonnegative".into()));
    }

    let grid = op.grid();
    let start = StateVector::new(
        Arc::clone(grid),
        u0.values().iter().map(|&v| v.max(0.0)).collect(),
    )?;
    let (target_smooth, _) = positive_smooth_approx(
        &StateVector::new(
            Arc::clone(grid),
            target.values().iter().map(|&v| v.max(0.0)).collect(),
        )?,
        TARGET_SMOOTHING_FRACTION * epsilon,
    )?;

    // parking slab: spend surplus horizon with no control, once
    let tail = t_final.min(config.tail_duration);
    let t_park = t_final - tail;
    let mut slabs_prefix: Vec<Slab> = Vec::new();
    let mut parked = start.clone();
    let mut min_park = start.min_value();
    if t_park > 1e-12 {
        let base = (t_park / config.park_dt).ceil() as usize;
        let (slab, out, min) = simulate_slab_adaptive(
            op,
            f,
            t_park,
            vec![0.0; grid.n_nodes()],
            &start,
            base,
            epsilon / 16.0,
        )?;
        slabs_prefix.push(slab);
        parked = out;
        min_park = min;
    }

    let mut best: Option<(Vec<Slab>, StateVector, BudgetTrace, ShapeDesign)> = None;
    let mut last_err: Option<Error> = None;
    for setting in &config.attempts {
        match steer_tail(op, profile, f, &parked, target, &target_smooth, epsilon, tail, *setting, config)
        {
            Ok((slabs, state, trace, design)) => {
                let better = best
                    .as_ref()
                    .is_none_or(|(_, _, t, _)| trace.terminal_error < t.terminal_error);
                if better {
                    best = Some((slabs, state, trace, design));
                }
                if best.as_ref().is_some_and(|(_, _, t, _)| t.terminal_error < epsilon) {
                    break;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }

    let Some((tail_slabs, final_state, mut trace, design)) = best else {
        return Err(last_err.unwrap_or(Error::BudgetUnreachable {
            budget: "terminal steering error",
            required: epsilon,
            achieved: f64::NAN,
        }));
    };
    let terminal_error = l2_norm(&final_state.sub(target)?);
    if terminal_error >= epsilon {
        return Err(Error::BudgetUnreachable {
            budget: "terminal steering error",
            required: epsilon,
            achieved: terminal_error,
        });
    }
    trace.t_park = t_park;
    trace.min_state = trace.min_state.min(min_park);

    let mut slabs = slabs_prefix;
    slabs.extend(tail_slabs);
    let mut breakpoints = Vec::with_capacity(slabs.len() + 1);
    breakpoints.push(0.0);
    let mut acc = 0.0;
    for slab in &slabs {
        acc += slab.duration;
        breakpoints.push(acc);
    }
    *breakpoints.last_mut().expect("nonempty") = t_final;
    let profiles: Vec<Vec<f64>> = slabs.iter().map(|s| s.profile.clone()).collect();
    let dt_hints: Vec<f64> = slabs.iter().map(|s| s.dt).collect();
    let control = PiecewiseStaticControl::new(Arc::clone(grid), breakpoints, profiles)?;

    Ok(ControlPlan {
        control,
        dt_hints,
        epsilon,
        initial: u0.clone(),
        target: target.clone(),
        terminal_error,
        trace,
        design,
    })
}

/// Synthesize the active tail [collar | expand | shape] from the parked
/// state, for one collar geometry.
#[allow(clippy::too_many_arguments)]
fn steer_tail(
    op: &DiscreteOperator,
    profile: &DiffusionProfile,
    f: &Nonlinearity,
    parked: &StateVector,
    target: &StateVector,
    target_smooth: &StateVector,
    epsilon: f64,
    tail: f64,
    setting: DrainSetting,
    config: &SynthesisConfig,
) -> Result<(Vec<Slab>, StateVector, BudgetTrace, ShapeDesign)> {
    let grid = op.grid();
    let h = grid.spacing();
    let margin = config.margin_cells * h;
    let plateau_end = margin + setting.plateau_cells * h;
    let shape_margin = plateau_end + 1.5 * setting.plateau_cells * h;
    if shape_margin > 0.35 {
        return Err(Error::Precondition(format!(
            "grid too coarse for the collar geometry: shaping margin {shape_margin:.3} \
             would swallow the core"
        )));
    }

    // collar profile: -K on the band, vanishing flatly at the endpoints
    let riser = shape_margin;
    let raw_collar: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let y = 1.0 - x.abs();
            let protect = if y >= riser {
                0.0
            } else if y <= plateau_end {
                1.0
            } else {
                1.0 - smoothstep((y - plateau_end) / (riser - plateau_end))
            };
            -setting.drain_rate * protect
        })
        .collect();
    let (collar_profile, _, _) =
        flat_windowed_profile(grid, profile, &raw_collar, margin, &config.window_orders)
            .ok_or(Error::FlatnessUnreachable(0))?;

    let w_shape_probe = window_profile(grid, shape_margin, 1)?;
    let core: Vec<bool> = w_shape_probe.iter().map(|&w| w >= 1.0).collect();

    let sigma_budget = SIGMA_FRACTION * epsilon;
    let smoothing_slice = SMOOTHING_FRACTION * epsilon;
    let nu_cap = f.nu().min(3.0).exp();

    // preliminary collar pass to size the active slab durations
    let base_collar_steps = |d: f64| ((d / config.collar_dt).ceil() as usize).max(64);
    let guess = tail - 2e-3_f64.min(0.25 * tail);
    let (_, v_guess, _) = simulate_slab_adaptive(
        op,
        f,
        guess,
        collar_profile.clone(),
        parked,
        base_collar_steps(guess),
        epsilon / 8.0,
    )?;
    let (v_prov, _) = positive_smooth_approx(&v_guess, epsilon / 16.0)?;
    let s_prov = ratio_majorant_core(target_smooth, &v_prov, &core);
    let sv_prov = v_prov.scale(s_prov);
    let rate_sv = operator_rate(op, f, &sv_prov);
    let rate_target = operator_rate(op, f, target_smooth);
    let mut t_shape = (setting.shape_time_factor * (epsilon / 3.0) / rate_target.max(rate_sv))
        .min(0.45 * tail);
    let mut t_expand = (smoothing_slice / rate_sv).min(0.05 * tail).min(0.5 * t_shape);

    let mut result: Option<(Vec<Slab>, StateVector, BudgetTrace, ShapeDesign)> = None;
    for _ in 0..=config.expansion_retries {
        t_shape = t_shape.max(1e-12);
        t_expand = t_expand.max(1e-14);
        let t_collar = tail - t_shape - t_expand;
        if t_collar <= 0.0 {
            return Err(Error::Precondition(format!(
                "active tail {tail} too short for its slab durations"
            )));
        }

        // final collar pass at the exact duration
        let (collar_slab, v_c, min_c) = simulate_slab_adaptive(
            op,
            f,
            t_collar,
            collar_profile.clone(),
            parked,
            base_collar_steps(t_collar),
            epsilon / 16.0,
        )?;

        // smooth the drained state against a budget that accounts for the
        // amplification S it will suffer
        let (v_prov2, _) = positive_smooth_approx(&v_c, epsilon / 16.0)?;
        let s_guess = ratio_majorant_core(target_smooth, &v_prov2, &core);
        let mut smoothing_budget = smoothing_slice / (s_guess * nu_cap);
        let (mut v_eps, mut smoothing_error) = positive_smooth_approx(&v_c, smoothing_budget)?;
        let mut scale_factor = ratio_majorant_core(target_smooth, &v_eps, &core);
        if smoothing_error * scale_factor * nu_cap > smoothing_slice {
            smoothing_budget = smoothing_slice / (scale_factor * nu_cap);
            let redo = positive_smooth_approx(&v_c, smoothing_budget)?;
            v_eps = redo.0;
            smoothing_error = redo.1;
            scale_factor = ratio_majorant_core(target_smooth, &v_eps, &core);
            if smoothing_error * scale_factor * nu_cap > smoothing_slice {
                return Err(Error::BudgetUnreachable {
                    budget: "pre-expansion smoothing",
                    required: smoothing_slice / (scale_factor * nu_cap),
                    achieved: smoothing_error,
                });
            }
        }
        if !scale_factor.is_finite() || scale_factor > 1e12 {
            return Err(Error::BudgetUnreachable {
                budget: "expansion scale",
                required: 1e12,
                achieved: scale_factor,
            });
        }

        // adjusted target: attainable from below inside the drained band
        let adj_target: Vec<f64> = target_smooth
            .values()
            .iter()
            .zip(v_eps.values())
            .map(|(&t, &v)| t.min(scale_factor * v))
            .collect();
        let target_adjustment = {
            let d: Vec<f64> = adj_target
                .iter()
                .zip(target_smooth.values())
                .map(|(a, t)| a - t)
                .collect();
            l2_norm_raw(&d, grid.quad_weights())
        };

        // shaping profile: log ratio, windowed to vanish at the endpoints
        let alpha_raw: Vec<f64> = adj_target
            .iter()
            .zip(v_eps.values())
            .map(|(t, v)| (t / (scale_factor * v)).ln().min(0.0))
            .collect();
        let (alpha_shape, window, order) =
            flat_windowed_profile(grid, profile, &alpha_raw, shape_margin, &config.window_orders)
                .ok_or(Error::FlatnessUnreachable(0))?;

        // design identity on the window core
        let shape_core_budget = SHAPE_CORE_FRACTION * epsilon;
        let shape_core_error = core_design_error(
            grid,
            &alpha_shape,
            &window,
            scale_factor,
            v_eps.values(),
            &adj_target,
        );

        // expansion slab
        let alpha1 = scale_factor.ln() / t_expand;
        let (expand_slab, v_expanded, min_a) = simulate_slab_adaptive(
            op,
            f,
            t_expand,
            vec![alpha1; grid.n_nodes()],
            &v_c,
            config.steps_per_active_slab,
            sigma_budget / 8.0,
        )?;
        let sigma_measured = l2_norm(&v_expanded.sub(&v_eps.scale(scale_factor))?);
        if sigma_measured >= sigma_budget {
            t_expand *= 0.25;
            continue;
        }

        // shaping slab
        let (shape_slab, v_out, min_b) = simulate_slab_adaptive(
            op,
            f,
            t_shape,
            alpha_shape.iter().map(|a| a / t_shape).collect(),
            &v_expanded,
            config.steps_per_active_slab,
            epsilon / 8.0,
        )?;
        let terminal_error = l2_norm(&v_out.sub(target)?);

        let trace = BudgetTrace {
            t_park: 0.0,
            t_collar,
            t_expand,
            t_shape,
            plateau_cells: setting.plateau_cells,
            drain_rate: setting.drain_rate,
            scale_factor,
            smoothing_budget,
            smoothing_error,
            target_adjustment,
            sigma_budget,
            sigma_measured,
            shape_core_budget,
            shape_core_error,
            window_order: order,
            shape_margin,
            terminal_error,
            min_state: min_c.min(min_a).min(min_b).min(v_out.min_value()),
        };
        let design = ShapeDesign {
            alpha: alpha_shape.clone(),
            scale: scale_factor,
            state: v_eps.values().to_vec(),
            target: adj_target.clone(),
            window: window.clone(),
        };
        result = Some((vec![collar_slab, expand_slab, shape_slab], v_out, trace, design));
        break;
    }

    result.ok_or(Error::BudgetUnreachable {
        budget: "expansion residual",
        required: sigma_budget,
        achieved: f64::NAN,
    })
}

/// Crude magnitude of d/dt on a state: ||Mv + f(v)||, used to size slab
/// durations from first-order bounds.
fn operator_rate(op: &DiscreteOperator, f: &Nonlinearity, v: &StateVector) -> f64 {
    let mut rhs = op.apply_slice(v.values());
    for (r, (&x, &u)) in rhs.iter_mut().zip(v.grid().nodes().iter().zip(v.values())) {
        *r += f.eval(x, 0.0, u);
    }
    l2_norm_raw(&rhs, v.grid().quad_weights()).max(1e-9)
}

/// Strict majorant of the pointwise target/state ratio over the shaping
/// core (the drained band outside it is handled by target adjustment).
fn ratio_majorant_core(target: &StateVector, v: &StateVector, core: &[bool]) -> f64 {
    target
        .values()
        .iter()
        .zip(v.values())
        .zip(core)
        .filter(|(_, &c)| c)
        .map(|((t, v), _)| t / v)
        .fold(0.0_f64, f64::max)
        + 1.0
}

/// Window the raw profile, escalating the flattening order until the
/// endpoint flatness conditions hold: |alpha'/a| and |alpha' a'| must
/// decrease monotonically toward each endpoint over the five nearest
/// nodes.
fn flat_windowed_profile(
    grid: &Arc<SpatialGrid>,
    profile: &DiffusionProfile,
    alpha_raw: &[f64],
    margin: f64,
    orders: &[u32],
) -> Option<(Vec<f64>, Vec<f64>, u32)> {
    for &order in orders {
        let window = window_profile(grid, margin, order).ok()?;
        let alpha: Vec<f64> = alpha_raw.iter().zip(&window).map(|(a, w)| a * w).collect();
        if endpoint_flatness_ok(grid, profile, &alpha) {
            return Some((alpha, window, order));
        }
    }
    None
}

fn endpoint_flatness_ok(
    grid: &Arc<SpatialGrid>,
    profile: &DiffusionProfile,
    alpha: &[f64],
) -> bool {
    let n = grid.n_cells();
    if n < 12 {
        return false;
    }
    let h = grid.spacing();
    let ratios = |idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut over_a = Vec::new();
        let mut times_ap = Vec::new();
        for &i in idx {
            let ap = (alpha[i + 1] - alpha[i - 1]) / (2.0 * h);
            let x = grid.node(i);
            let a = profile.eval(x).max(1e-300);
            over_a.push((ap / a).abs());
            times_ap.push((ap * profile.eval_prime(x)).abs());
        }
        (over_a, times_ap)
    };
    let decreasing_toward_endpoint =
        |v: &[f64]| -> bool { v.windows(2).all(|p| p[0] <= p[1] * 1.05 + 1e-12) };
    let left: Vec<usize> = (1..=5).collect();
    let right: Vec<usize> = (n - 5..n).rev().collect();
    let (l1, l2) = ratios(&left);
    let (r1, r2) = ratios(&right);
    decreasing_toward_endpoint(&l1)
        && decreasing_toward_endpoint(&l2)
        && decreasing_toward_endpoint(&r1)
        && decreasing_toward_endpoint(&r2)
}

/// Weighted L2 distance of exp(alpha) S v from the adjusted target over
/// the nodes where the window equals one; zero up to rounding by
/// construction because alpha is the unmodified log ratio there.
fn core_design_error(
    grid: &Arc<SpatialGrid>,
    alpha: &[f64],
    window: &[f64],
    s: f64,
    v: &[f64],
    target: &[f64],
) -> f64 {
    let w = grid.quad_weights();
    let mut acc = 0.0;
    for i in 0..alpha.len() {
        if window[i] >= 1.0 {
            let d = alpha[i].exp() * s * v[i] - target[i];
            acc += w[i] * d * d;
        }
    }
    acc.sqrt()
}

/// Run one slab and return the final state and the minimum value seen.
fn simulate_slab(
    op: &DiscreteOperator,
    f: &Nonlinearity,
    slab: &Slab,
    from: &StateVector,
) -> Result<(StateVector, f64)> {
    let control = PiecewiseStaticControl::new(
        Arc::clone(op.grid()),
        vec![0.0, slab.duration],
        vec![slab.profile.clone()],
    )?;
    let config = SolverConfig { dt: slab.dt, ..SolverConfig::default() };
    let traj = solve(op, f, &control, from, &config)?;
    let min = traj.min_over_time();
    let final_state = traj.states.into_iter().next_back().expect("trajectory nonempty");
    Ok((final_state, min))
}

/// Run one slab with step doubling until two successive step counts agree
/// to `tol` in the weighted norm, so the stored step hint carries a
/// measured time-discretization error below its budget share. Returns the
/// slab with the accepted step recorded.
fn simulate_slab_adaptive(
    op: &DiscreteOperator,
    f: &Nonlinearity,
    duration: f64,
    profile: Vec<f64>,
    from: &StateVector,
    base_steps: usize,
    tol: f64,
) -> Result<(Slab, StateVector, f64)> {
    let mut steps = base_steps.max(8);
    let mut slab = Slab { duration, profile, dt: duration / steps as f64 };
    let (mut state, mut min) = simulate_slab(op, f, &slab, from)?;
    for _ in 0..7 {
        steps *= 2;
        let finer = Slab { dt: duration / steps as f64, ..slab.clone() };
        let (next, next_min) = simulate_slab(op, f, &finer, from)?;
        let gap = l2_norm(&next.sub(&state)?);
        slab = finer;
        state = next;
        min = next_min;
        if gap < tol {
            return Ok((slab, state, min));
        }
    }
    log::warn!("slab step refinement stalled above tolerance {tol:.3e}");
    Ok((slab, state, min))
}

/// Replay a plan's slabs from an arbitrary state, following the stored
/// step hints scaled by `dt_scale`.
pub fn replay(
    op: &DiscreteOperator,
    f: &Nonlinearity,
    control: &PiecewiseStaticControl,
    dt_hints: &[f64],
    u0: &StateVector,
    dt_scale: f64,
) -> Result<(StateVector, f64)> {
    if dt_hints.len() != control.n_slabs() {
        return Err(Error::Precondition(format!(
            "{} step hints for {} slabs",
            dt_hints.len(),
            control.n_slabs()
        )));
    }
    let mut state = u0.clone();
    let mut min_seen = u0.min_value();
    let breakpoints = control.breakpoints();
    for k in 0..control.n_slabs() {
        let slab = Slab {
            duration: breakpoints[k + 1] - breakpoints[k],
            profile: control.profiles()[k].clone(),
            dt: (dt_hints[k] * dt_scale).max(1e-15),
        };
        let (next, min) = simulate_slab(op, f, &slab, &state)?;
        min_seen = min_seen.min(min);
        state = next;
    }
    Ok((state, min_seen))
}

/// Outcome of re-running a plan, possibly on another resolution.
#[derive(Debug, Clone)]
pub struct PlanCheck {
    pub terminal_error: f64,
    pub epsilon: f64,
    pub min_state: f64,
    pub n_cells: usize,
    pub pass: bool,
}

/// Re-run a synthesized plan and check its terminal claim, optionally on a
/// different resolution (profiles and states are linearly resampled) or
/// with rescaled steps.
pub fn verify_plan(
    plan: &ControlPlan,
    profile: &DiffusionProfile,
    bc: &BoundaryCondition,
    f: &Nonlinearity,
    n_cells: Option<usize>,
    dt_scale: f64,
) -> Result<PlanCheck> {
    let source_grid = plan.control.grid();
    let grid = match n_cells {
        Some(n) if n != source_grid.n_cells() => SpatialGrid::new(n)?,
        _ => Arc::clone(source_grid),
    };
    let op = DiscreteOperator::assemble(&grid, profile, bc)?;

    let (control, initial, target) = if grid.n_cells() == source_grid.n_cells() {
        (plan.control.clone(), plan.initial.clone(), plan.target.clone())
    } else {
        let profiles: Vec<Vec<f64>> = plan
            .control
            .profiles()
            .iter()
            .map(|p| resample_linear(p, source_grid, &grid))
            .collect();
        let control = PiecewiseStaticControl::new(
            Arc::clone(&grid),
            plan.control.breakpoints().to_vec(),
            profiles,
        )?;
        let initial = StateVector::new(
            Arc::clone(&grid),
            resample_linear(plan.initial.values(), source_grid, &grid),
        )?;
        let target = StateVector::new(
            Arc::clone(&grid),
            resample_linear(plan.target.values(), source_grid, &grid),
        )?;
        (control, initial, target)
    };

    let (final_state, min_state) = replay(&op, f, &control, &plan.dt_hints, &initial, dt_scale)?;
    let terminal_error = l2_norm(&final_state.sub(&target)?);
    let scale = initial.max_abs().max(1.0);
    let pass = terminal_error < plan.epsilon && min_state >= -1e-9 * scale;
    Ok(PlanCheck {
        terminal_error,
        epsilon: plan.epsilon,
        min_state,
        n_cells: grid.n_cells(),
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_problem(
        n: usize,
    ) -> (Arc<SpatialGrid>, DiscreteOperator, DiffusionProfile, Nonlinearity) {
        let grid = SpatialGrid::new(n).unwrap();
        let profile = DiffusionProfile::legendre();
        let op =
            DiscreteOperator::assemble(&grid, &profile, &BoundaryCondition::WeightedNeumann)
                .unwrap();
        let f = Nonlinearity::power_decay(0.1, 3.0).unwrap();
        (grid, op, profile, f)
    }

    fn canonical_states(grid: &Arc<SpatialGrid>) -> (StateVector, StateVector) {
        let u0 = StateVector::from_fn(grid, |x| 1.0 + (std::f64::consts::PI * x).cos());
        let target = StateVector::from_fn(grid, |x| 2.0 * (-4.0 * x * x).exp());
        (u0, target)
    }

    #[test]
    fn steers_canonical_pair_in_short_horizon() {
        let (grid, op, profile, f) = canonical_problem(500);
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.08 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 0.2, &SynthesisConfig::default())
                .unwrap();
        assert!(plan.terminal_error < epsilon, "terminal {}", plan.terminal_error);
        assert_eq!(plan.horizon(), 0.2);
        assert_eq!(plan.n_slabs(), 3);
        let trace = &plan.trace;
        assert!(trace.min_state >= -1e-9, "min {}", trace.min_state);
        assert!(trace.sigma_measured < trace.sigma_budget);
        assert!(trace.shape_core_error < 1e-10, "core {}", trace.shape_core_error);
        assert!(trace.target_adjustment < epsilon / 2.0);
        let identity = plan.design.design_identity_max_error();
        assert!(identity <= 1e-12, "design identity defect {identity}");
    }

    #[test]
    fn longer_horizon_adds_parking_slab() {
        let (grid, op, profile, f) = canonical_problem(500);
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.08 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 1.0, &SynthesisConfig::default())
                .unwrap();
        assert!(plan.terminal_error < epsilon);
        assert_eq!(plan.n_slabs(), 4);
        assert_eq!(plan.horizon(), 1.0);
        assert!((plan.trace.t_park - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_initial_state() {
        let (grid, op, profile, f) = canonical_problem(64);
        let (_, target) = canonical_states(&grid);
        let zero = StateVector::constant(&grid, 0.0);
        let err =
            synthesize(&op, &profile, &f, &zero, &target, 0.1, 0.2, &SynthesisConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn steers_down_to_near_zero_target() {
        let (grid, op, profile, f) = canonical_problem(300);
        let u0 = StateVector::from_fn(&grid, |x| 1.5 + 0.5 * x);
        let target = StateVector::constant(&grid, 0.0);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, 0.15, 0.2, &SynthesisConfig::default())
                .unwrap();
        assert!(plan.terminal_error < 0.15, "terminal {}", plan.terminal_error);
    }

    #[test]
    fn replay_reproduces_terminal_error() {
        let (grid, op, profile, f) = canonical_problem(400);
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.08 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 0.2, &SynthesisConfig::default())
                .unwrap();
        let check =
            verify_plan(&plan, &profile, &BoundaryCondition::WeightedNeumann, &f, None, 1.0)
                .unwrap();
        assert!(check.pass);
        assert!((check.terminal_error - plan.terminal_error).abs() < 1e-9);
    }

    #[test]
    fn verification_is_robust_to_step_refinement() {
        let (grid, op, profile, f) = canonical_problem(400);
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.08 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 0.2, &SynthesisConfig::default())
                .unwrap();
        let refined =
            verify_plan(&plan, &profile, &BoundaryCondition::WeightedNeumann, &f, None, 0.5)
                .unwrap();
        assert!(refined.pass, "refined-step error {}", refined.terminal_error);
        assert!(
            (refined.terminal_error - plan.terminal_error).abs() < 0.1 * epsilon,
            "halving the steps moved the terminal error {} -> {}",
            plan.terminal_error,
            refined.terminal_error
        );
    }

    #[test]
    fn cross_resolution_verification_agrees() {
        let (grid, op, profile, f) = canonical_problem(500);
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.1 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 0.2, &SynthesisConfig::default())
                .unwrap();
        let check = verify_plan(
            &plan,
            &profile,
            &BoundaryCondition::WeightedNeumann,
            &f,
            Some(750),
            1.0,
        )
        .unwrap();
        assert!(check.pass, "cross-resolution error {}", check.terminal_error);
        assert_eq!(check.n_cells, 750);
    }

    #[test]
    fn robin_problem_steers_too() {
        let grid = SpatialGrid::new(500).unwrap();
        let profile = DiffusionProfile::sqrt_profile();
        let bc = BoundaryCondition::robin(1.0, -1.0, 1.0, 1.0).unwrap();
        let op = DiscreteOperator::assemble(&grid, &profile, &bc).unwrap();
        let f = Nonlinearity::zero();
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.08 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 0.2, &SynthesisConfig::default())
                .unwrap();
        assert!(plan.terminal_error < epsilon, "terminal {}", plan.terminal_error);
        assert!(plan.trace.min_state >= -1e-9);
    }

    #[test]
    fn shaping_profiles_vanish_at_endpoints_and_are_nonpositive() {
        let (grid, op, profile, f) = canonical_problem(400);
        let (u0, target) = canonical_states(&grid);
        let epsilon = 0.08 * l2_norm(&target);
        let plan =
            synthesize(&op, &profile, &f, &u0, &target, epsilon, 0.2, &SynthesisConfig::default())
                .unwrap();
        // last slab is the shaping slab, first is the collar
        let shape = plan.control.profiles().last().unwrap();
        assert_eq!(shape[0], 0.0);
        assert_eq!(*shape.last().unwrap(), 0.0);
        assert!(shape.iter().all(|&v| v <= 0.0));
        let collar = &plan.control.profiles()[0];
        assert_eq!(collar[0], 0.0);
        assert!(collar.iter().all(|&v| v <= 0.0));
        assert!(collar.iter().any(|&v| v < -100.0));
        let _ = grid;
    }
}
