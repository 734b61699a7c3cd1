//! Capacity back-off sweep for data-driven designs.
//!
//! For every `(M, delta)` cell, `B` batches of `M` samples are drawn from the
//! true model. Each batch is turned into a kernel density estimate, a policy
//! is designed on the estimate for transmit probability `kappa_bar - delta`,
//! and the policy is scored under the true model. A cell reports how often
//! the true transmit probability exceeds `kappa_bar` and the spread of the
//! true asymptotic error.
//!
//! Batch `b` of the cell at `(M, delta_list[i])` draws from the ChaCha8 stream
//! `b` of seed `derive_seed(seed, [M, i])`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{GaussianMixture, ModelFile};
use crate::error::{Error, Result};
use crate::kde::{self, SampleBatch};
use crate::seeding::derive_seed;
use crate::solver::{alternating_solve, objective, transmit_prob, SolverConfig};

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub true_model: GaussianMixture,
    pub kappa_bar: f64,
    pub delta_list: Vec<f64>,
    pub m_list: Vec<usize>,
    pub batches_per_cell: usize,
    pub seed: u64,
    /// Tolerances and iteration caps for the per-batch designs; `kappa_bar`
    /// and `delta` are overwritten per cell.
    pub solver: SolverConfig,
}

/// JSON layout of [`ExperimentSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpecFile {
    pub true_model: ModelFile,
    pub kappa_bar: f64,
    pub delta_list: Vec<f64>,
    pub m_list: Vec<usize>,
    #[serde(default = "default_batches")]
    pub batches_per_cell: usize,
    pub seed: u64,
    #[serde(default)]
    pub theta_tol: Option<f64>,
    #[serde(default)]
    pub lambda_tol: Option<f64>,
}

fn default_batches() -> usize {
    50
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_bar > 0.0 && self.kappa_bar < 1.0) {
            return Err(Error::param("kappa_bar", format!("{} not in (0, 1)", self.kappa_bar)));
        }
        if self.delta_list.is_empty() {
            return Err(Error::param("delta_list", "must not be empty"));
        }
        if let Some(d) = self
            .delta_list
            .iter()
            .find(|d| !(**d > 0.0 && **d < self.kappa_bar))
        {
            return Err(Error::param("delta_list", format!("{d} not in (0, kappa_bar)")));
        }
        if self.m_list.is_empty() {
            return Err(Error::param("m_list", "must not be empty"));
        }
        if self.m_list.iter().any(|m| *m < 2) {
            return Err(Error::param("m_list", "batch sizes must be at least 2"));
        }
        if self.batches_per_cell == 0 {
            return Err(Error::param("batches_per_cell", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_file(file: ExperimentSpecFile) -> Result<Self> {
        let mut solver = SolverConfig::default();
        if let Some(t) = file.theta_tol {
            solver.theta_tol = t;
        }
        if let Some(t) = file.lambda_tol {
            solver.lambda_tol = t;
        }
        let spec = Self {
            true_model: GaussianMixture::from_model_file(file.true_model)?,
            kappa_bar: file.kappa_bar,
            delta_list: file.delta_list,
            m_list: file.m_list,
            batches_per_cell: file.batches_per_cell,
            seed: file.seed,
            solver,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file(serde_json::from_str(&text)?)
    }
}

/// Outcome of one `(M, delta)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub m: usize,
    pub delta: f64,
    /// Batches that produced a design.
    pub batches: usize,
    /// Batches rejected by the density fit or the solver.
    pub failed_batches: usize,
    /// Designs whose solver run hit an iteration cap.
    pub nonconverged: usize,
    pub violation_freq: f64,
    pub violation_stderr: f64,
    pub nmse_mean: f64,
    pub nmse_std: f64,
    /// Unnormalized reference curve `1 / (delta * M^(2 / (d + 4)))`.
    pub theory_rate: f64,
    pub true_transmit_mean: f64,
    /// Largest `|P_hat(U = 1) - (kappa_bar - delta)|` over designs, measured
    /// under each batch's own density estimate.
    pub design_residual_max: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    /// For each delta: violation frequency is nonincreasing along ascending M.
    pub nonincreasing_in_m: Vec<(f64, bool)>,
    /// For each M: violation frequency is nonincreasing along ascending delta.
    pub nonincreasing_in_delta: Vec<(usize, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kappa_bar: f64,
    pub dim: usize,
    pub batches_per_cell: usize,
    pub seed: u64,
    pub cells: Vec<CellRecord>,
    pub trends: TrendSummary,
}

impl ExperimentReport {
    pub const CSV_HEADER: &'static str = "M,delta,violation_freq,nmse_mean,nmse_std,theory_rate";

    pub fn to_csv(&self) -> String {
        cells_to_csv(&self.cells)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn cell(&self, m: usize, delta: f64) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.m == m && c.delta == delta)
    }
}

pub fn cells_to_csv(cells: &[CellRecord]) -> String {
    let mut out = String::from(ExperimentReport::CSV_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.m, c.delta, c.violation_freq, c.nmse_mean, c.nmse_std, c.theory_rate
        );
    }
    out
}

struct BatchOutcome {
    true_transmit: f64,
    nmse: f64,
    design_residual: f64,
    converged: bool,
}

fn run_batch(
    true_model: &GaussianMixture,
    config: &SolverConfig,
    m: usize,
    seed: u64,
    batch: u64,
) -> Result<BatchOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let samples = SampleBatch::draw(true_model, m, &mut rng)?;
    let estimate = kde::fit(&samples)?;
    let (policy, trace) = alternating_solve(&estimate, config)?;
    Ok(BatchOutcome {
        true_transmit: transmit_prob(true_model, &policy)?,
        nmse: objective(true_model, &policy, config.kappa_bar)?,
        design_residual: (transmit_prob(&estimate, &policy)? - config.target_kappa()).abs(),
        converged: trace.converged,
    })
}

/// Runs the `B` batches of one `(M, delta)` cell.
pub fn run_cell(
    true_model: &GaussianMixture,
    kappa_bar: f64,
    delta: f64,
    m: usize,
    batches: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CellRecord> {
    let config = SolverConfig {
        kappa_bar,
        delta,
        ..solver.clone()
    };
    config.validate()?;
    if m < 2 || batches == 0 {
        return Err(Error::param("cell", "need M >= 2 and at least one batch"));
    }
    let results: Vec<Result<BatchOutcome>> = (0..batches as u64)
        .into_par_iter()
        .map(|b| run_batch(true_model, &config, m, seed, b))
        .collect();

    let mut notes = Vec::new();
    let mut ok = Vec::with_capacity(batches);
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => notes.push(format!("batch {b}: {e}")),
        }
    }
    let d = true_model.dim() as f64;
    let theory_rate = 1.0 / (delta * (m as f64).powf(2.0 / (d + 4.0)));
    let count = ok.len();
    let failed_batches = batches - count;
    if count == 0 {
        return Ok(CellRecord {
            m,
            delta,
            batches: 0,
            failed_batches,
            nonconverged: 0,
            violation_freq: f64::NAN,
            violation_stderr: f64::NAN,
            nmse_mean: f64::NAN,
            nmse_std: f64::NAN,
            theory_rate,
            true_transmit_mean: f64::NAN,
            design_residual_max: f64::NAN,
            notes,
        });
    }
    let n = count as f64;
    let violations = ok.iter().filter(|o| o.true_transmit > kappa_bar).count();
    let violation_freq = violations as f64 / n;
    let nmse_mean = ok.iter().map(|o| o.nmse).sum::<f64>() / n;
    let nmse_std = if count > 1 {
        (ok.iter().map(|o| (o.nmse - nmse_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(CellRecord {
        m,
        delta,
        batches: count,
        failed_batches,
        nonconverged: ok.iter().filter(|o| !o.converged).count(),
        violation_freq,
        violation_stderr: (violation_freq * (1.0 - violation_freq) / n).sqrt(),
        nmse_mean,
        nmse_std,
        theory_rate,
        true_transmit_mean: ok.iter().map(|o| o.true_transmit).sum::<f64>() / n,
        design_residual_max: ok.iter().map(|o| o.design_residual).fold(0.0, f64::max),
        notes,
    })
}

fn nonincreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

fn summarize(cells: &[CellRecord], m_list: &[usize], delta_list: &[f64]) -> TrendSummary {
    let mut ms = m_list.to_vec();
    ms.sort_unstable();
    let mut deltas = delta_list.to_vec();
    deltas.sort_by(f64::total_cmp);
    let freq = |m: usize, d: f64| {
        cells
            .iter()
            .find(|c| c.m == m && c.delta == d)
            .map_or(f64::NAN, |c| c.violation_freq)
    };
    TrendSummary {
        nonincreasing_in_m: deltas
            .iter()
            .map(|&d| (d, nonincreasing(&ms.iter().map(|&m| freq(m, d)).collect::<Vec<_>>())))
            .collect(),
        nonincreasing_in_delta: ms
            .iter()
            .map(|&m| {
                (m, nonincreasing(&deltas.iter().map(|&d| freq(m, d)).collect::<Vec<_>>()))
            })
            .collect(),
    }
}

/// Runs every `(M, delta)` cell of `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.m_list.len() * spec.delta_list.len());
    for &m in &spec.m_list {
        for (i, &delta) in spec.delta_list.iter().enumerate() {
            let seed = derive_seed(spec.seed, &[m as u64, i as u64]);
            cells.push(run_cell(
                &spec.true_model,
                spec.kappa_bar,
                delta,
                m,
                spec.batches_per_cell,
                seed,
                &spec.solver,
            )?);
        }
    }
    let trends = summarize(&cells, &spec.m_list, &spec.delta_list);
    Ok(ExperimentReport {
        kappa_bar: spec.kappa_bar,
        dim: spec.true_model.dim(),
        batches_per_cell: spec.batches_per_cell,
        seed: spec.seed,
        cells,
        trends,
    })
}
