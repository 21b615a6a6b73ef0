//! Synthesize a steering schedule for a degenerate diffusion problem:
//! raised cosine -> Gaussian bump within 10% at t = 0.5.

use degen_rd::synthesis::SynthesisConfig;
use degen_rd::{
    eigendecompose, norms, synthesize, BoundaryCondition, DiffusionProfile, DiscreteOperator,
    Nonlinearity, SpatialGrid, StateVector,
};

fn main() -> degen_rd::Result<()> {
    let grid = SpatialGrid::new(200)?;
    let profile = DiffusionProfile::legendre();
    let op = DiscreteOperator::assemble(&grid, &profile, &BoundaryCondition::WeightedNeumann)?;

    // Spectrum of the degenerate operator: lambda_p = p (p + 1).
    let basis = eigendecompose(&op, 6)?;
    println!("lowest eigenvalues: {:?}", basis.eigenvalues());

    // Steer a raised cosine to a Gaussian bump within 10% in 0.5 time units.
    let f = Nonlinearity::power_decay(0.1, 3.0)?;
    let x = grid.nodes();
    let u0 = StateVector::new(
        grid.clone(),
        x.iter().map(|&x| 1.0 + (std::f64::consts::PI * x).cos()).collect(),
    )?;
    let target = StateVector::new(
        grid.clone(),
        x.iter().map(|&x| 2.0 * (-4.0 * x * x).exp()).collect(),
    )?;
    let eps = 0.1 * norms::l2_norm(&target);
    let plan = synthesize(&op, &profile, &f, &u0, &target, eps, 0.5, &SynthesisConfig::default())?;
    println!(
        "{} slabs, terminal error {:.3e} (budget {:.3e})",
        plan.control.n_slabs(),
        plan.terminal_error,
        eps
    );
    Ok(())
}
