//! One function per subcommand. Each returns the process exit code on
//! success-shaped outcomes (0, or 4 when a verification ran to
//! completion and reported failure); validation and numerical errors
//! propagate as errors and are mapped to exit codes by the caller.

use anyhow::{anyhow, bail, Context, Result};
use degen_rd::climate::run_scenario;
use degen_rd::norms::{l2_norm, mass};
use degen_rd::{
    eigendecompose, selftest, solve, synthesize, verify_plan, DiscreteOperator, SolverConfig,
    SpatialGrid, SynthesisConfig, Trajectory,
};

use crate::config::RunConfig;
use crate::output::{csv_float, csv_table, report, OutDir};
use crate::planfile;

pub struct Ctx {
    pub config: RunConfig,
    pub out: OutDir,
    pub seed: u64,
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let n_nodes = traj.states.first().map(|s| s.len()).unwrap_or(0);
    let names: Vec<String> =
        std::iter::once("t".to_string()).chain((0..n_nodes).map(|i| format!("u_{i}"))).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    csv_table(&header, traj.times.iter().zip(&traj.states), |(t, state), fields| {
        fields.push(csv_float(*t));
        fields.extend(state.values().iter().map(|&v| csv_float(v)));
    })
}

pub fn cmd_spectrum(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.config;
    let n_modes = cfg.spectrum.as_ref().map(|s| s.n_modes).unwrap_or(10);
    let grid = SpatialGrid::new(cfg.grid.n_cells)?;
    let profile = cfg.problem.diffusion()?;
    let bc = cfg.problem.boundary()?;
    let op = DiscreteOperator::assemble(&grid, &profile, &bc)?;
    let basis = eigendecompose(&op, n_modes)?;

    let legendre_oracle = cfg.problem.profile == "legendre";
    let eigen_csv = if legendre_oracle {
        csv_table(
            &["p", "lambda", "analytic", "relative_error"],
            basis.eigenvalues().iter().enumerate(),
            |(p, &lambda), fields| {
                let analytic = (p * (p + 1)) as f64;
                fields.push(p.to_string());
                fields.push(csv_float(lambda));
                fields.push(csv_float(analytic));
                fields.push(csv_float((lambda - analytic).abs() / analytic.max(1.0)));
            },
        )
    } else {
        csv_table(
            &["p", "lambda"],
            basis.eigenvalues().iter().enumerate(),
            |(p, &lambda), fields| {
                fields.push(p.to_string());
                fields.push(csv_float(lambda));
            },
        )
    };
    ctx.out.write("eigenvalues.csv", &eigen_csv)?;

    let names: Vec<String> =
        std::iter::once("x".to_string()).chain((0..n_modes).map(|p| format!("phi_{p}"))).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let modes_csv = csv_table(&header, grid.nodes().iter().enumerate(), |(i, &x), fields| {
        fields.push(csv_float(x));
        fields.extend((0..n_modes).map(|p| csv_float(basis.mode(p)[i])));
    });
    ctx.out.write("eigenvectors.csv", &modes_csv)?;

    println!(
        "spectrum: {n_modes} modes of a = {} at n = {}; lambda_0 = {:.3e}",
        profile.label(),
        cfg.grid.n_cells,
        basis.eigenvalues()[0]
    );
    Ok(0)
}

pub fn cmd_simulate(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.config;
    let sim = cfg.simulate.as_ref().ok_or_else(|| anyhow!("config needs a [simulate] section"))?;
    let grid = SpatialGrid::new(cfg.grid.n_cells)?;
    let profile = cfg.problem.diffusion()?;
    let bc = cfg.problem.boundary()?;
    let reaction = cfg.problem.reaction()?;
    let op = DiscreteOperator::assemble(&grid, &profile, &bc)?;
    let u0 = sim.initial.build(&grid)?;
    let control = sim.control.build(&grid, cfg.grid.t_final)?;
    let solver = SolverConfig {
        scheme: sim.scheme()?,
        dt: cfg.grid.dt,
        store_stride: cfg.output.state_stride,
        ..SolverConfig::default()
    };
    let traj = solve(&op, &reaction, &control, &u0, &solver)?;

    ctx.out.write("trajectory.csv", &trajectory_csv(&traj))?;
    let diag_csv = csv_table(
        &["t", "l2", "h1a_seminorm", "min", "f_l2"],
        traj.diagnostics.iter(),
        |d, fields| {
            fields.push(csv_float(d.t));
            fields.push(csv_float(d.l2));
            fields.push(csv_float(d.h1a_semi));
            fields.push(csv_float(d.min_value));
            fields.push(csv_float(d.f_l2));
        },
    );
    ctx.out.write("diagnostics.csv", &diag_csv)?;

    let final_state = traj.states.last().expect("trajectory nonempty");
    let summary = report(&[
        ("n_cells", cfg.grid.n_cells.to_string()),
        ("dt", csv_float(cfg.grid.dt)),
        ("t_final", csv_float(cfg.grid.t_final)),
        ("scheme", format!("{:?}", solver.scheme)),
        ("seed", ctx.seed.to_string()),
        ("final_l2", csv_float(l2_norm(final_state))),
        ("min_over_time", csv_float(traj.min_over_time())),
        ("mass_initial", csv_float(mass(&u0))),
        ("mass_final", csv_float(mass(final_state))),
    ]);
    ctx.out.write("summary.txt", &summary)?;
    println!(
        "simulate: t = {}, final L2 = {:.6e}, min over time = {:.3e}",
        cfg.grid.t_final,
        l2_norm(final_state),
        traj.min_over_time()
    );
    Ok(0)
}

pub fn cmd_synthesize(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.config;
    let syn =
        cfg.synthesize.as_ref().ok_or_else(|| anyhow!("config needs a [synthesize] section"))?;
    let grid = SpatialGrid::new(cfg.grid.n_cells)?;
    let profile = cfg.problem.diffusion()?;
    let bc = cfg.problem.boundary()?;
    let reaction = cfg.problem.reaction()?;
    let op = DiscreteOperator::assemble(&grid, &profile, &bc)?;
    let u0 = syn.initial.build(&grid)?;
    let target = syn.target.build(&grid)?;
    let epsilon =
        if syn.epsilon_relative { syn.epsilon * l2_norm(&target) } else { syn.epsilon };

    let plan = synthesize(
        &op,
        &profile,
        &reaction,
        &u0,
        &target,
        epsilon,
        cfg.grid.t_final,
        &SynthesisConfig::default(),
    )?;
    let check = verify_plan(&plan, &profile, &bc, &reaction, None, 1.0)?;

    ctx.out.write("plan.txt", &planfile::to_text(&plan)?)?;
    let t = &plan.trace;
    let body = report(&[
        ("epsilon", csv_float(epsilon)),
        ("terminal_error", csv_float(plan.terminal_error)),
        ("scale_factor", csv_float(t.scale_factor)),
        ("expansion_time", csv_float(t.t_expand)),
        ("shaping_time", csv_float(t.t_shape)),
        ("parked_time", csv_float(t.t_park)),
        ("window_order", t.window_order.to_string()),
        ("n_slabs", plan.n_slabs().to_string()),
        ("seed", ctx.seed.to_string()),
        ("verify_terminal_error", csv_float(check.terminal_error)),
        ("verify_min_state", csv_float(check.min_state)),
        ("verify_pass", check.pass.to_string()),
    ]);
    ctx.out.write("report.txt", &body)?;

    let verdict = if check.pass { "PASS" } else { "FAIL" };
    println!(
        "synthesize: terminal_error {:.6e} vs epsilon {:.6e}: {verdict} ({} slabs, scale {:.4})",
        check.terminal_error,
        epsilon,
        plan.n_slabs(),
        t.scale_factor
    );
    Ok(if check.pass { 0 } else { 4 })
}

pub fn cmd_verify(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.config;
    let ver = cfg.verify.as_ref().ok_or_else(|| anyhow!("config needs a [verify] section"))?;
    let text = std::fs::read_to_string(&ver.plan)
        .with_context(|| format!("cannot read plan {}", ver.plan))?;
    let plan = planfile::from_text(&text).with_context(|| format!("invalid plan {}", ver.plan))?;

    // Canonical re-serialization; byte-identical to a stored canonical plan.
    ctx.out.write("plan-echo.txt", &planfile::to_text(&plan)?)?;

    let horizon = plan.horizon();
    if (horizon - cfg.grid.t_final).abs() > 1e-9 * horizon.max(1.0) {
        bail!(
            "plan/problem mismatch: plan horizon {horizon} vs grid.t_final {}",
            cfg.grid.t_final
        );
    }
    let plan_cells = plan.control.grid().n_cells();
    if cfg.grid.n_cells != plan_cells {
        bail!("plan/problem mismatch: plan stores n_cells {plan_cells}, grid.n_cells {} \
               (cross-resolution checks go through verify.n_cells)", cfg.grid.n_cells);
    }

    let profile = cfg.problem.diffusion()?;
    let bc = cfg.problem.boundary()?;
    let reaction = cfg.problem.reaction()?;
    let dt_scale = ver.dt_scale.unwrap_or(1.0);
    let check = verify_plan(&plan, &profile, &bc, &reaction, ver.n_cells, dt_scale)?;

    let body = report(&[
        ("plan", ver.plan.clone()),
        ("plan_n_cells", plan_cells.to_string()),
        ("checked_n_cells", check.n_cells.to_string()),
        ("dt_scale", csv_float(dt_scale)),
        ("epsilon", csv_float(check.epsilon)),
        ("terminal_error", csv_float(check.terminal_error)),
        ("min_state", csv_float(check.min_state)),
        ("seed", ctx.seed.to_string()),
        ("pass", check.pass.to_string()),
    ]);
    ctx.out.write("report.txt", &body)?;

    let verdict = if check.pass { "PASS" } else { "FAIL" };
    println!(
        "verify: terminal_error {:.6e} vs epsilon {:.6e} at n = {}: {verdict}",
        check.terminal_error, check.epsilon, check.n_cells
    );
    Ok(if check.pass { 0 } else { 4 })
}

pub fn cmd_climate(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.config;
    let scenario = match &cfg.climate {
        Some(section) => section.scenario(cfg.output.state_stride)?,
        None => degen_rd::climate::ScenarioConfig {
            store_stride: cfg.output.state_stride,
            ..Default::default()
        },
    };
    let (traj, rep) = run_scenario(&scenario)?;

    ctx.out.write("trajectory.csv", &trajectory_csv(&traj))?;
    let grid_nodes: Vec<f64> =
        traj.states.first().map(|s| s.grid().nodes().to_vec()).unwrap_or_default();
    let long_rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .flat_map(|(&t, s)| {
            let nodes = grid_nodes.clone();
            s.values().to_vec().into_iter().enumerate().map(move |(i, u)| (nodes[i], t, u))
        })
        .collect::<Vec<_>>();
    let long_csv = csv_table(&["x", "t", "u"], long_rows, |(x, t, u), fields| {
        fields.push(csv_float(x));
        fields.push(csv_float(t));
        fields.push(csv_float(u));
    });
    ctx.out.write("climate_long.csv", &long_csv)?;

    let body = report(&[
        ("min_kelvin", csv_float(rep.min_kelvin)),
        ("max_kelvin", csv_float(rep.max_kelvin)),
        ("mean_initial", csv_float(rep.mean_initial)),
        ("mean_final", csv_float(rep.mean_final)),
        ("pole_equator_gap", csv_float(rep.pole_equator_gap)),
        ("in_physical_range", rep.in_physical_range.to_string()),
        ("fitted_theta", csv_float(rep.fitted.theta)),
        ("fitted_delta_star", csv_float(rep.fitted.delta_star)),
        ("fitted_nu", csv_float(rep.fitted.nu)),
        ("seed", ctx.seed.to_string()),
    ]);
    ctx.out.write("report.txt", &body)?;
    println!(
        "climate: mean {:.2} -> {:.2} K, range [{:.1}, {:.1}] K, equator-pole gap {:.2} K",
        rep.mean_initial, rep.mean_final, rep.min_kelvin, rep.max_kelvin, rep.pole_equator_gap
    );
    Ok(0)
}

pub fn cmd_selftest(ctx: &Ctx, only: &[usize]) -> Result<i32> {
    let results = if only.is_empty() {
        selftest::run_all()
    } else {
        only.iter().map(|&id| selftest::run_criterion(id)).collect()
    };
    let mut lines = String::new();
    let mut all_pass = true;
    for r in &results {
        let line = r.summary_line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        all_pass &= r.pass;
    }
    ctx.out.write("selftest.txt", &lines)?;
    Ok(if all_pass { 0 } else { 4 })
}
