//! Fits a Gaussian kernel density estimate to samples and reports how close it
//! gets to the generating density as the batch grows.
//!
//! cargo run --release --example fit_kde

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use remote_estimation::{kde, GaussianMixture, SampleBatch};

fn main() -> remote_estimation::Result<()> {
    let truth = GaussianMixture::univariate(&[(0.4, -1.5, 0.3), (0.6, 1.0, 0.5)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid: Vec<f64> = (0..=400).map(|i| -5.0 + i as f64 * 0.025).collect();

    for m in [100, 1_000, 10_000] {
        let batch = SampleBatch::draw(&truth, m, &mut rng)?;
        let (fit, bw) = kde::fit_with_bandwidth(&batch)?;
        let mut ise = 0.0;
        for &x in &grid {
            let e = fit.pdf(&[x])? - truth.pdf(&[x])?;
            ise += e * e * 0.025;
        }
        println!(
            "M = {m:>6}: h = {:.4} (s = {:.3}, IQR = {:.3}), integrated squared error = {ise:.2e}",
            bw.per_axis_h[0], bw.per_axis_s[0], bw.per_axis_q[0]
        );
    }
    Ok(())
}
