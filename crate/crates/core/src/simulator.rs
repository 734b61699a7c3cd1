//! Finite-population Monte Carlo of the collision channel.
//!
//! Each trial draws `n` observations, applies the threshold policy, and scores
//! the receiver's reconstruction: when at most `capacity` sensors transmit,
//! transmitted values are recovered exactly and silent ones are estimated by
//! `theta`; otherwise every packet is lost and every observation is estimated
//! by the model mean.
//!
//! Trial `t` draws from a ChaCha8 stream selected by `(seed, t)`, and trial
//! results are reduced in trial order, so a report does not depend on how the
//! trials were scheduled across threads.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::GaussianMixture;
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::solver::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub n: usize,
    pub capacity: usize,
    pub kappa_bar: f64,
}

impl ChannelSpec {
    /// `capacity = ceil(kappa_bar * n)`.
    pub fn new(n: usize, kappa_bar: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa_bar) {
            return Err(Error::param("kappa_bar", format!("{kappa_bar} not in [0, 1]")));
        }
        let raw = kappa_bar * n as f64;
        // Absorb products like 0.1 * 30 = 3.0000000000000004.
        let snapped = if (raw - raw.round()).abs() <= 1e-9 * raw.max(1.0) {
            raw.round()
        } else {
            raw.ceil()
        };
        Self::with_capacity(n, snapped as usize, kappa_bar)
    }

    pub fn with_capacity(n: usize, capacity: usize, kappa_bar: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "need at least one sensor"));
        }
        if capacity > n {
            return Err(Error::param("capacity", format!("{capacity} exceeds n = {n}")));
        }
        Ok(Self {
            n,
            capacity,
            kappa_bar,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: usize,
    pub capacity: usize,
    pub trials: usize,
    pub nmse_mean: f64,
    /// Normal-approximation 95% half-width, `1.96 * stderr`.
    pub nmse_half_width: f64,
    /// Fraction of trials with more than `capacity` transmissions.
    pub collision_freq: f64,
    /// Mean over trials of the fraction of transmitting sensors.
    pub empirical_transmit_rate: f64,
    /// Standard error of `empirical_transmit_rate`.
    pub transmit_rate_stderr: f64,
}

impl SimulationReport {
    pub const CSV_HEADER: &'static str =
        "n,trials,nmse_mean,nmse_half_width,collision_freq,empirical_transmit_rate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.trials,
            self.nmse_mean,
            self.nmse_half_width,
            self.collision_freq,
            self.empirical_transmit_rate
        )
    }

    /// Standard error of `collision_freq`.
    pub fn collision_stderr(&self) -> f64 {
        let p = self.collision_freq;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Writes reports as CSV, one row per report.
pub fn reports_to_csv(reports: &[SimulationReport]) -> String {
    let mut out = String::from(SimulationReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn reports_to_json(reports: &[SimulationReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)? + "\n")
}

pub fn write_reports(reports: &[SimulationReport], path: impl AsRef<Path>, json: bool) -> Result<()> {
    let path = path.as_ref();
    let text = if json {
        reports_to_json(reports)?
    } else {
        reports_to_csv(reports)
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct TrialOutcome {
    nmse: f64,
    collided: bool,
    transmit_fraction: f64,
}

fn run_trial(
    model: &GaussianMixture,
    policy: &Policy,
    channel: &ChannelSpec,
    alpha: &[f64],
    seed: u64,
    trial: u64,
) -> TrialOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let d = model.dim();
    let mut x = vec![0.0; d];
    let mut transmitted = 0usize;
    let mut silent_err = 0.0;
    let mut collision_err = 0.0;
    for _ in 0..channel.n {
        model.sample_into(&mut rng, &mut x);
        let to_theta: f64 = x.iter().zip(&policy.theta).map(|(a, b)| (a - b) * (a - b)).sum();
        if to_theta > policy.lambda {
            transmitted += 1;
        } else {
            silent_err += to_theta;
        }
        collision_err += x.iter().zip(alpha).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let collided = transmitted > channel.capacity;
    let err = if collided { collision_err } else { silent_err };
    TrialOutcome {
        nmse: err / channel.n as f64,
        collided,
        transmit_fraction: transmitted as f64 / channel.n as f64,
    }
}

fn mean_and_stderr(xs: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Simulates `trials` independent rounds of the channel.
pub fn simulate(
    model: &GaussianMixture,
    policy: &Policy,
    channel: &ChannelSpec,
    trials: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::param("trials", "need at least one trial"));
    }
    if policy.theta.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: policy.theta.len(),
        });
    }
    let channel = ChannelSpec::with_capacity(channel.n, channel.capacity, channel.kappa_bar)?;
    let alpha = model.mean();
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(model, policy, &channel, &alpha, seed, t))
        .collect();

    let (nmse_mean, nmse_se) = mean_and_stderr(outcomes.iter().map(|o| o.nmse));
    let (rate, rate_se) = mean_and_stderr(outcomes.iter().map(|o| o.transmit_fraction));
    let collisions = outcomes.iter().filter(|o| o.collided).count();
    Ok(SimulationReport {
        n: channel.n,
        capacity: channel.capacity,
        trials,
        nmse_mean,
        nmse_half_width: 1.96 * nmse_se,
        collision_freq: collisions as f64 / trials as f64,
        empirical_transmit_rate: rate,
        transmit_rate_stderr: rate_se,
    })
}

/// Simulates each population size in `n_list` with capacity `ceil(kappa_bar * n)`.
pub fn collision_curve(
    model: &GaussianMixture,
    policy: &Policy,
    kappa_bar: f64,
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<SimulationReport>> {
    n_list
        .iter()
        .map(|&n| {
            let channel = ChannelSpec::new(n, kappa_bar)?;
            simulate(model, policy, &channel, trials, derive_seed(seed, &[n as u64]))
        })
        .collect()
}
