//! Two-dimensional design. Ball integrals are approximated on a fixed
//! quasi-Monte Carlo point set, so results are reproducible but approximate.
//!
//! cargo run --release --example multivariate

use remote_estimation::simulator::{self, ChannelSpec};
use remote_estimation::solver;
use remote_estimation::{GaussianComponent, GaussianMixture, SolverConfig};

fn main() -> remote_estimation::Result<()> {
    let model = GaussianMixture::new(vec![
        GaussianComponent::from_variance(0.5, vec![-1.0, 0.0], vec![0.3, 0.3])?,
        GaussianComponent::from_variance(0.5, vec![1.0, 0.5], vec![0.2, 0.4])?,
    ])?;
    let config = SolverConfig {
        theta_tol: 1e-6,
        lambda_tol: 1e-4,
        ..SolverConfig::new(0.5, 0.05)?
    };
    let (policy, trace) = solver::alternating_solve(&model, &config)?;
    println!(
        "theta = ({:.4}, {:.4}), lambda = {:.4}, J = {:.4}, converged = {}",
        policy.theta[0],
        policy.theta[1],
        policy.lambda,
        solver::objective(&model, &policy, 0.5)?,
        trace.converged
    );
    let report = simulator::simulate(&model, &policy, &ChannelSpec::new(2_000, 0.5)?, 100, 5)?;
    println!(
        "n = 2000: collisions {:.3}, NMSE {:.4} ± {:.4}, transmit rate {:.4}",
        report.collision_freq, report.nmse_mean, report.nmse_half_width, report.empirical_transmit_rate
    );
    Ok(())
}
