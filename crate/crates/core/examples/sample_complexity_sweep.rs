//! Runs a capacity back-off sweep and prints the per-cell report.
//!
//! Without arguments a small grid is used; pass a spec file such as
//! `data/sample_complexity.json` for the full sweep (several minutes):
//!
//! cargo run --release --example sample_complexity_sweep -- data/sample_complexity.json

use remote_estimation::experiments::{self, ExperimentSpec};
use remote_estimation::{GaussianMixture, SolverConfig};

fn main() -> remote_estimation::Result<()> {
    let spec = match std::env::args().nth(1) {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec {
            true_model: GaussianMixture::univariate(&[
                (0.2, -2.0, 0.2),
                (0.2, -1.0, 0.075),
                (0.1, 0.0, 0.1),
                (0.3, 1.0, 0.1),
                (0.2, 2.0, 0.1),
            ])?,
            kappa_bar: 0.5,
            delta_list: vec![0.001, 0.01, 0.1],
            m_list: vec![100, 1_000],
            batches_per_cell: 20,
            seed: 1,
            solver: SolverConfig {
                theta_tol: 1e-7,
                ..SolverConfig::default()
            },
        },
    };
    let report = experiments::run_experiment(&spec)?;
    print!("{}", report.to_csv());
    for (delta, ok) in &report.trends.nonincreasing_in_m {
        println!("delta = {delta}: violation frequency nonincreasing in M: {ok}");
    }
    for (m, ok) in &report.trends.nonincreasing_in_delta {
        println!("M = {m}: violation frequency nonincreasing in delta: {ok}");
    }
    Ok(())
}
