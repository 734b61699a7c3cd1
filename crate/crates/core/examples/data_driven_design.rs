//! Designs a policy from samples only, backing off the capacity by `delta`,
//! then scores it under the true density.
//!
//! cargo run --release --example data_driven_design

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use remote_estimation::solver;
use remote_estimation::{kde, GaussianMixture, SampleBatch, SolverConfig};

fn main() -> remote_estimation::Result<()> {
    let truth = GaussianMixture::univariate(&[
        (0.2, -2.0, 0.2),
        (0.2, -1.0, 0.075),
        (0.1, 0.0, 0.1),
        (0.3, 1.0, 0.1),
        (0.2, 2.0, 0.1),
    ])?;
    let kappa_bar = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    println!("    M  delta   theta  lambda  true P(U=1)  true J");
    for m in [1_000, 10_000] {
        let batch = SampleBatch::draw(&truth, m, &mut rng)?;
        let estimate = kde::fit(&batch)?;
        for delta in [0.0, 0.01, 0.05] {
            let config = SolverConfig::new(kappa_bar, delta)?;
            let (policy, _) = solver::alternating_solve(&estimate, &config)?;
            println!(
                "{m:>6}  {delta:<5} {:>7.4} {:>7.4} {:>12.4} {:>7.4}",
                policy.theta[0],
                policy.lambda,
                solver::transmit_prob(&truth, &policy)?,
                solver::objective(&truth, &policy, kappa_bar)?
            );
        }
    }
    Ok(())
}
