//! Designs the threshold policy for a known five-mode mixture and compares the
//! centroid update with the literal update rule.
//!
//! cargo run --example solve_known_model

use remote_estimation::solver::{self, InnerUpdate};
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

    for update in [InnerUpdate::Ccp, InnerUpdate::Literal] {
        let config = SolverConfig {
            update,
            ..SolverConfig::new(kappa_bar, 0.0)?
        };
        let (policy, trace) = solver::alternating_solve(&model, &config)?;
        println!(
            "{update:?}: theta = {:.4}, lambda = {:.4}, J = {:.4}, P(U=1) = {:.6} ({} outer / {} inner iterations)",
            policy.theta[0],
            policy.lambda,
            solver::objective(&model, &policy, kappa_bar)?,
            solver::transmit_prob(&model, &policy)?,
            trace.outer_iterations(),
            trace.inner_iterations(),
        );
    }

    // The problem is non-convex; other starting points can land in other basins.
    for start in [-2.0, 0.0, 2.0] {
        let config = SolverConfig {
            theta_init: Some(vec![start]),
            ..SolverConfig::new(kappa_bar, 0.0)?
        };
        let (policy, _) = solver::alternating_solve(&model, &config)?;
        println!(
            "start {start:+.1}: theta = {:.4}, J = {:.4}",
            policy.theta[0],
            solver::objective(&model, &policy, kappa_bar)?
        );
    }
    println!("no communication: J = {:.4}", model.variance_total());
    Ok(())
}
