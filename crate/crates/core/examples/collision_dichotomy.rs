//! Policies just below capacity stop colliding as the population grows, while
//! policies just above it collide almost surely and lose everything.
//!
//! cargo run --release --example collision_dichotomy

use remote_estimation::simulator;
use remote_estimation::solver;
use remote_estimation::{GaussianMixture, SolverConfig};

fn main() -> remote_estimation::Result<()> {
    let model = GaussianMixture::univariate(&[(0.5, -1.0, 0.25), (0.5, 1.5, 0.5)])?;
    let kappa_bar = 0.4;
    let n_list = [50, 500, 5_000];

    for design_kappa in [0.37, 0.43] {
        let (policy, _) = solver::alternating_solve(&model, &SolverConfig::new(design_kappa, 0.0)?)?;
        let reports = simulator::collision_curve(&model, &policy, kappa_bar, &n_list, 300, 21)?;
        println!("designed for P(U=1) = {design_kappa} on a channel with capacity fraction {kappa_bar}:");
        for r in reports {
            println!(
                "  n = {:>5}: collision frequency {:.3}, NMSE {:.4} ± {:.4}",
                r.n, r.collision_freq, r.nmse_mean, r.nmse_half_width
            );
        }
    }
    println!("variance (error when every packet is lost): {:.4}", model.variance_total());
    Ok(())
}
