//! Axis-aligned Gaussian mixtures and the ball integrals the solver needs.
//!
//! A [`GaussianMixture`] is the single density representation used by the
//! crate: known models are loaded from JSON and kernel density estimates are
//! built as equal-weight mixtures (see [`crate::kde`]).
//!
//! In one dimension every ball integral is evaluated in closed form through the
//! error function. In higher dimensions a Euclidean ball against an
//! axis-aligned Gaussian has no elementary closed form, so those integrals are
//! averages over a fixed set of quasi-random nodes: the first coordinate of a
//! Halton sequence selects the component and Box-Muller pairs of the remaining
//! coordinates give the standard normal draws. The node set depends only on
//! the mixture, so results are reproducible bit for bit.

use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Number of quasi-random nodes used for ball integrals when `dim > 1`.
pub const DEFAULT_QMC_NODES: usize = 1 << 16;

/// Largest tolerated deviation of the weight sum from one before rejecting.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vec<f64>, stddev: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidModel(format!(
                "component weight {weight} outside [0, 1]"
            )));
        }
        if mean.is_empty() {
            return Err(Error::InvalidModel("component has dimension 0".into()));
        }
        if mean.len() != stddev.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: stddev.len(),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("component mean is not finite".into()));
        }
        if stddev.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidModel(
                "component standard deviations must be finite and positive".into(),
            ));
        }
        Ok(Self {
            weight,
            mean,
            stddev,
        })
    }

    /// Builds a component from per-axis variances.
    pub fn from_variance(weight: f64, mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidModel(
                "component variances must be finite and positive".into(),
            ));
        }
        let stddev = variance.iter().map(|v| v.sqrt()).collect();
        Self::new(weight, mean, stddev)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// The event `{x : |x - center|^2 <= radius_sq}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius_sq: f64,
}

impl Ball {
    /// `radius_sq` may be `+inf` (the whole space).
    pub fn new(center: Vec<f64>, radius_sq: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("center", "must be a finite nonempty vector"));
        }
        if radius_sq.is_nan() || radius_sq < 0.0 {
            return Err(Error::param("radius_sq", format!("{radius_sq} is not >= 0")));
        }
        Ok(Self { center, radius_sq })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// Mass, first moment and second moment about the center, restricted to a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallMoments {
    /// `P(|X - c|^2 <= r^2)`.
    pub mass: f64,
    /// `E[X 1(|X - c|^2 <= r^2)]`.
    pub first: Vec<f64>,
    /// `E[|X - c|^2 1(|X - c|^2 <= r^2)]`.
    pub second: f64,
    /// Derivative of `mass` with respect to `radius_sq`. Only available in one
    /// dimension, where the mass is smooth in the radius.
    pub mass_slope: Option<f64>,
    /// Approximate 95% error bound on `mass`; zero for closed-form results.
    pub error_bound: f64,
}

/// Weighted mixture of axis-aligned Gaussian components sharing one dimension.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    // Row-major, one row of `dim` entries per component.
    means: Vec<f64>,
    stddevs: Vec<f64>,
    nodes: OnceLock<Arc<QmcNodes>>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidModel("mixture has no components".into()))?;
        let dim = first.dim();
        let mut weights = Vec::with_capacity(components.len());
        let mut means = Vec::with_capacity(components.len() * dim);
        let mut stddevs = Vec::with_capacity(components.len() * dim);
        for c in components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
            weights.push(c.weight);
            means.extend_from_slice(&c.mean);
            stddevs.extend_from_slice(&c.stddev);
        }
        Self::from_parts(dim, weights, means, stddevs)
    }

    /// Builds a mixture from flat row-major parameter arrays.
    pub fn from_parts(
        dim: usize,
        mut weights: Vec<f64>,
        means: Vec<f64>,
        stddevs: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidModel("mixture has no components".into()));
        }
        if means.len() != weights.len() * dim || stddevs.len() != weights.len() * dim {
            return Err(Error::InvalidModel(format!(
                "expected {} parameters per array for {} components of dimension {dim}",
                weights.len() * dim,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidModel("weights must lie in [0, 1]".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("means must be finite".into()));
        }
        if stddevs.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidModel(
                "standard deviations must be finite and positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if total != 1.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            weights,
            cumulative,
            means,
            stddevs,
            nodes: OnceLock::new(),
        })
    }

    pub fn standard_normal() -> Self {
        Self::from_parts(1, vec![1.0], vec![0.0], vec![1.0]).expect("valid model")
    }

    /// One-dimensional mixture from `(weight, mean, variance)` triples.
    pub fn univariate(terms: &[(f64, f64, f64)]) -> Result<Self> {
        let components = terms
            .iter()
            .map(|&(w, m, v)| GaussianComponent::from_variance(w, vec![m], vec![v]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn component_mean(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component_stddev(&self, i: usize) -> &[f64] {
        &self.stddevs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn component(&self, i: usize) -> GaussianComponent {
        GaussianComponent {
            weight: self.weights[i],
            mean: self.component_mean(i).to_vec(),
            stddev: self.component_stddev(i).to_vec(),
        }
    }

    pub fn components(&self) -> impl Iterator<Item = GaussianComponent> + '_ {
        (0..self.num_components()).map(|i| self.component(i))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            })
        }
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let d = self.dim;
        let mut total = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let mu = &self.means[i * d..(i + 1) * d];
            let sd = &self.stddevs[i * d..(i + 1) * d];
            let mut p = *w;
            for j in 0..d {
                p *= normal::density(x[j], mu[j], sd[j]);
            }
            total += p;
        }
        Ok(total)
    }

    /// Mixture cdf; one-dimensional models only.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::NotUnivariate(self.dim));
        }
        Ok(self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(w, (mu, sd))| w * normal::cdf((x - mu) / sd))
            .sum())
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim;
        let mut m = vec![0.0; d];
        for (i, w) in self.weights.iter().enumerate() {
            for j in 0..d {
                m[j] += w * self.means[i * d + j];
            }
        }
        m
    }

    /// `E[|X - E[X]|^2]`.
    pub fn variance_total(&self) -> f64 {
        let d = self.dim;
        let m = self.mean();
        let mut v = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let mut within = 0.0;
            for j in 0..d {
                let sd = self.stddevs[i * d + j];
                let dm = self.means[i * d + j] - m[j];
                within += sd * sd + dm * dm;
            }
            v += w * within;
        }
        v
    }

    pub fn ball_moments(&self, ball: &Ball) -> Result<BallMoments> {
        self.check_dim(ball.dim())?;
        if ball.radius_sq == 0.0 {
            return Ok(BallMoments {
                mass: 0.0,
                first: vec![0.0; self.dim],
                second: 0.0,
                mass_slope: None,
                error_bound: 0.0,
            });
        }
        if self.dim == 1 {
            Ok(self.ball_moments_univariate(ball.center[0], ball.radius_sq))
        } else {
            Ok(self.ball_moments_qmc(ball))
        }
    }

    pub fn mass_in_ball(&self, ball: &Ball) -> Result<f64> {
        Ok(self.ball_moments(ball)?.mass)
    }

    pub fn partial_mean(&self, ball: &Ball) -> Result<Vec<f64>> {
        Ok(self.ball_moments(ball)?.first)
    }

    pub fn partial_second_moment(&self, ball: &Ball) -> Result<f64> {
        Ok(self.ball_moments(ball)?.second)
    }

    fn ball_moments_univariate(&self, theta: f64, radius_sq: f64) -> BallMoments {
        let r = radius_sq.sqrt();
        let (a, b) = (theta - r, theta + r);
        let (mut mass, mut first, mut second, mut edge) = (0.0, 0.0, 0.0, 0.0);
        for ((&w, &mu), &sd) in self.weights.iter().zip(&self.means).zip(&self.stddevs) {
            let inv = sd.recip();
            let alpha = (a - mu) * inv;
            let beta = (b - mu) * inv;
            let m0 = normal::interval(alpha, beta);
            let (pa, pb) = (normal::pdf(alpha), normal::pdf(beta));
            // Standardized moments of Z over [alpha, beta].
            let m1 = pa - pb;
            let za = if pa > 0.0 { alpha * pa } else { 0.0 };
            let zb = if pb > 0.0 { beta * pb } else { 0.0 };
            let m2 = m0 + za - zb;
            let c = mu - theta;
            mass += w * m0;
            first += w * (mu * m0 + sd * m1);
            second += w * (c * c * m0 + 2.0 * c * sd * m1 + sd * sd * m2);
            edge += w * (pa + pb) * inv;
        }
        let mass_slope = if r.is_finite() { edge / (2.0 * r) } else { 0.0 };
        BallMoments {
            mass: mass.clamp(0.0, 1.0),
            first: vec![first],
            second: second.max(0.0),
            mass_slope: Some(mass_slope),
            error_bound: 0.0,
        }
    }

    fn ball_moments_qmc(&self, ball: &Ball) -> BallMoments {
        let nodes = self.qmc_nodes();
        let d = self.dim;
        let (mut count, mut second) = (0usize, 0.0);
        let mut first = vec![0.0; d];
        for x in nodes.points.chunks_exact(d) {
            let s: f64 = x
                .iter()
                .zip(&ball.center)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum();
            if s <= ball.radius_sq {
                count += 1;
                second += s;
                first.iter_mut().zip(x).for_each(|(f, xi)| *f += xi);
            }
        }
        let n = nodes.len() as f64;
        let mass = count as f64 / n;
        first.iter_mut().for_each(|f| *f /= n);
        BallMoments {
            mass,
            first,
            second: second / n,
            mass_slope: None,
            error_bound: 1.96 * (mass * (1.0 - mass) / n).sqrt(),
        }
    }

    fn qmc_nodes(&self) -> &QmcNodes {
        self.nodes
            .get_or_init(|| Arc::new(QmcNodes::build(self, DEFAULT_QMC_NODES)))
    }

    /// Index of the component selected by a uniform draw `u` in `[0, 1)`.
    fn pick_component(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.weights.len() - 1)
    }

    /// Draws one observation into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let i = self.pick_component(rng.random::<f64>());
        let d = self.dim;
        for (j, o) in out.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *o = self.means[i * d + j] + self.stddevs[i * d + j] * z;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.sample_into(rng, &mut x);
        x
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            dim: self.dim,
            components: self
                .components()
                .map(|c| ComponentFile {
                    weight: c.weight,
                    mean: c.mean,
                    variance: c.stddev.iter().map(|s| s * s).collect(),
                })
                .collect(),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self> {
        let components = file
            .components
            .into_iter()
            .map(|c| GaussianComponent::from_variance(c.weight, c.mean, c.variance))
            .collect::<Result<Vec<_>>>()?;
        let model = Self::new(components)?;
        if model.dim != file.dim {
            return Err(Error::InvalidModel(format!(
                "declared dim {} but components have dimension {}",
                file.dim, model.dim
            )));
        }
        Ok(model)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_model_file(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_model_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// On-disk mixture description. Spreads are given as variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub dim: usize,
    pub components: Vec<ComponentFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFile {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug)]
struct QmcNodes {
    dim: usize,
    points: Vec<f64>,
}

impl QmcNodes {
    fn build(model: &GaussianMixture, count: usize) -> Self {
        let d = model.dim;
        let pairs = d.div_ceil(2);
        let bases = first_primes(1 + 2 * pairs);
        let mut points = Vec::with_capacity(count * d);
        let mut z = vec![0.0; 2 * pairs];
        for k in 1..=count as u64 {
            let c = model.pick_component(radical_inverse(k, bases[0]));
            for p in 0..pairs {
                let u1 = radical_inverse(k, bases[1 + 2 * p]);
                let u2 = radical_inverse(k, bases[2 + 2 * p]);
                let rad = (-2.0 * u1.ln()).sqrt();
                let ang = std::f64::consts::TAU * u2;
                z[2 * p] = rad * ang.cos();
                z[2 * p + 1] = rad * ang.sin();
            }
            let mu = model.component_mean(c);
            let sd = model.component_stddev(c);
            points.extend((0..d).map(|j| mu[j] + sd[j] * z[j]));
        }
        Self { dim: d, points }
    }

    fn len(&self) -> usize {
        self.points.len() / self.dim
    }
}

/// Van der Corput radical inverse of `k` in `base`; lies in (0, 1) for k >= 1.
fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * f;
        k /= base;
        f *= inv;
    }
    r
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}
