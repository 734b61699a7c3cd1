//! Compares the finite-population error of a policy with its asymptotic value.
//!
//! cargo run --release --example mean_field_simulation

use remote_estimation::simulator::{self, SimulationReport};
use remote_estimation::solver;
use remote_estimation::{GaussianMixture, SolverConfig};

fn main() -> remote_estimation::Result<()> {
    let model = GaussianMixture::univariate(&[
        (0.2, -2.0, 0.2),
        (0.2, -1.0, 0.075),
        (0.1, 0.0, 0.1),
        (0.3, 1.0, 0.1),
        (0.2, 2.0, 0.1),
    ])?;
    let kappa_bar = 0.5;
    let (policy, _) = solver::alternating_solve(&model, &SolverConfig::new(kappa_bar, 0.05)?)?;
    println!(
        "policy theta = {:.4}, lambda = {:.4}; asymptotic J = {:.5}",
        policy.theta[0],
        policy.lambda,
        solver::objective(&model, &policy, kappa_bar)?
    );

    let reports = simulator::collision_curve(&model, &policy, kappa_bar, &[10, 100, 1_000, 10_000], 200, 3)?;
    println!("{}", SimulationReport::CSV_HEADER);
    for r in &reports {
        println!("{}", r.csv_row());
    }
    Ok(())
}
