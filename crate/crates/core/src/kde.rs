//! Gaussian product-kernel density estimation.
//!
//! The bandwidth on each axis follows the rule of thumb
//! `h = 1.06 * M^(-1/5) * min(s, Q / 1.34)` with `s` the sample standard
//! deviation (divisor `M - 1`) and `Q` the interquartile range. Quartiles use
//! linear interpolation between order statistics at position `(M - 1) p`.
//! The kernel is a proper Gaussian with standard deviation `h`, so a fit is an
//! equal-weight [`GaussianMixture`] centered on the samples.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::GaussianMixture;
use crate::error::{Error, Result};

/// `M` observations in `R^d` plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    data: Vec<f64>,
    pub seed: Option<u64>,
    pub source: String,
}

impl SampleBatch {
    /// Builds a batch from row-major data of width `dim`.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if data.len() % dim != 0 {
            return Err(Error::param(
                "data",
                format!("length {} is not a multiple of dim {dim}", data.len()),
            ));
        }
        if data.len() / dim < 2 {
            return Err(Error::param("samples", "a batch needs at least 2 samples"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("samples", "all samples must be finite"));
        }
        Ok(Self {
            dim,
            data,
            seed: None,
            source: String::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Self::from_flat(dim, rows.concat())
    }

    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::from_flat(1, xs.to_vec())
    }

    /// Draws `m` iid samples from `model`.
    pub fn draw<R: Rng + ?Sized>(model: &GaussianMixture, m: usize, rng: &mut R) -> Result<Self> {
        let d = model.dim();
        let mut data = vec![0.0; m * d];
        for row in data.chunks_exact_mut(d) {
            model.sample_into(rng, row);
        }
        Self::from_flat(d, data)
    }

    pub fn with_provenance(mut self, seed: Option<u64>, source: impl Into<String>) -> Self {
        self.seed = seed;
        self.source = source.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    fn axis(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn sample_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            m.iter_mut().zip(r).for_each(|(a, x)| *a += x);
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Reads a headerless CSV with one sample per row.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| {
                        Error::param("samples", format!("cannot parse `{f}` as a number: {e}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self::from_rows(&rows)?.with_provenance(None, path.display().to_string()))
    }

    /// Writes a headerless CSV using shortest round-trip decimal formatting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::with_capacity(self.data.len() * 20);
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Per-axis bandwidth and the statistics it was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub per_axis_h: Vec<f64>,
    pub per_axis_s: Vec<f64>,
    pub per_axis_q: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data at probability `p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn bandwidth(batch: &SampleBatch) -> Result<BandwidthReport> {
    let m = batch.len() as f64;
    let scale = 1.06 / m.powf(0.2);
    let mut report = BandwidthReport {
        per_axis_h: Vec::with_capacity(batch.dim()),
        per_axis_s: Vec::with_capacity(batch.dim()),
        per_axis_q: Vec::with_capacity(batch.dim()),
    };
    for j in 0..batch.dim() {
        let mut xs = batch.axis(j);
        let mean = xs.iter().sum::<f64>() / m;
        let s = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0)).sqrt();
        xs.sort_by(f64::total_cmp);
        let q = quantile_sorted(&xs, 0.75) - quantile_sorted(&xs, 0.25);
        let spread = match (s > 0.0, q > 0.0) {
            (true, true) => s.min(q / 1.34),
            (true, false) => s,
            (false, true) => q / 1.34,
            (false, false) => return Err(Error::DegenerateAxis { axis: j }),
        };
        report.per_axis_h.push(scale * spread);
        report.per_axis_s.push(s);
        report.per_axis_q.push(q);
    }
    Ok(report)
}

/// Fits the kernel density estimate of `batch`.
pub fn fit(batch: &SampleBatch) -> Result<GaussianMixture> {
    Ok(fit_with_bandwidth(batch)?.0)
}

pub fn fit_with_bandwidth(batch: &SampleBatch) -> Result<(GaussianMixture, BandwidthReport)> {
    let bw = bandwidth(batch)?;
    let m = batch.len();
    let stddevs = bw
        .per_axis_h
        .iter()
        .copied()
        .cycle()
        .take(m * batch.dim())
        .collect();
    let model = GaussianMixture::from_parts(
        batch.dim(),
        vec![1.0 / m as f64; m],
        batch.as_flat().to_vec(),
        stddevs,
    )?;
    Ok((model, bw))
}
