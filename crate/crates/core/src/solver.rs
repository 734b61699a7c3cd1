//! Threshold-policy design for the mean-field collision channel.
//!
//! A policy `(theta, lambda)` keeps an observation `x` silent when
//! `|x - theta|^2 <= lambda` and transmits it otherwise. For fixed `lambda`
//! the representation point `theta` is found with the convex-concave
//! procedure on
//!
//! ```text
//! L(theta, lambda) = E[min(|X - theta|^2, lambda)] - lambda * kappa
//! ```
//!
//! whose iteration has the closed form
//! `theta' = E[X 1(in ball)] + theta * P(outside ball)`. The outer loop
//! alternates that inner solve with a root solve for the `lambda` that makes
//! the transmit probability equal to the design target `kappa_bar - delta`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::{Ball, BallMoments, GaussianMixture};
use crate::error::{Error, Result};

/// Threshold transmission policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub theta: Vec<f64>,
    pub lambda: f64,
}

impl Policy {
    pub fn new(theta: Vec<f64>, lambda: f64) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("theta", "must be a finite nonempty vector"));
        }
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::param("lambda", format!("{lambda} is not >= 0")));
        }
        Ok(Self { theta, lambda })
    }

    /// The silent region.
    pub fn ball(&self) -> Ball {
        Ball::new(self.theta.clone(), self.lambda).expect("policy invariants hold")
    }

    pub fn transmits(&self, x: &[f64]) -> bool {
        dist_sq(x, &self.theta) > self.lambda
    }
}

/// Inner update used by [`ccp_solve`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerUpdate {
    /// `theta' = E[X 1(in)] + theta * P(out)`, the convex-concave step.
    #[default]
    Ccp,
    /// `theta' = E[X 1(in)] - kappa * theta`, the update as printed in the
    /// original algorithm listing. Its fixed points do not satisfy the centroid
    /// condition; kept only to reproduce historical numbers.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kappa_bar: f64,
    pub delta: f64,
    pub theta_tol: f64,
    pub lambda_tol: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub update: InnerUpdate,
    /// Starting point; the model mean when `None`.
    pub theta_init: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(kappa_bar: f64, delta: f64) -> Result<Self> {
        let cfg = Self {
            kappa_bar,
            delta,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_bar > 0.0 && self.kappa_bar < 1.0) {
            return Err(Error::param("kappa_bar", format!("{} not in (0, 1)", self.kappa_bar)));
        }
        if !(self.delta >= 0.0 && self.delta < self.kappa_bar) {
            return Err(Error::param(
                "delta",
                format!("{} not in [0, kappa_bar)", self.delta),
            ));
        }
        if !(self.theta_tol > 0.0 && self.lambda_tol > 0.0) {
            return Err(Error::param("tolerance", "tolerances must be positive"));
        }
        if self.max_inner_iters == 0 || self.max_outer_iters == 0 {
            return Err(Error::param("max_iters", "iteration caps must be positive"));
        }
        if let Some(t) = &self.theta_init {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("theta_init", "must be finite"));
            }
        }
        Ok(())
    }

    /// Transmit probability the design aims for.
    pub fn target_kappa(&self) -> f64 {
        self.kappa_bar - self.delta
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa_bar: 0.5,
            delta: 0.0,
            theta_tol: 1e-9,
            lambda_tol: 1e-9,
            max_inner_iters: 10_000,
            max_outer_iters: 1_000,
            update: InnerUpdate::Ccp,
            theta_init: None,
        }
    }
}

/// Iterates of one inner solve at fixed `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerTrace {
    pub lambda: f64,
    /// `thetas[0]` is the starting point.
    pub thetas: Vec<Vec<f64>>,
    pub converged: bool,
}

impl InnerTrace {
    pub fn iterations(&self) -> usize {
        self.thetas.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    /// `P(U = 1) - (kappa_bar - delta)`.
    pub constraint_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub outer: Vec<OuterRecord>,
    pub inner: Vec<InnerTrace>,
    pub converged: bool,
    /// Outer iteration after which each inner solve was cut to a single step
    /// because full inner solves stopped making progress.
    pub interleaved_from: Option<usize>,
}

impl SolveTrace {
    pub fn outer_iterations(&self) -> usize {
        self.outer.len().saturating_sub(1)
    }

    pub fn inner_iterations(&self) -> usize {
        self.inner.iter().map(InnerTrace::iterations).sum()
    }

    /// CSV with columns `iter, theta_0..theta_{d-1}, lambda, objective, constraint_residual`.
    pub fn to_csv(&self) -> String {
        let d = self.outer.first().map_or(0, |r| r.theta.len());
        let mut out = String::from("iter");
        for j in 0..d {
            let _ = write!(out, ",theta_{j}");
        }
        out.push_str(",lambda,objective,constraint_residual\n");
        for r in &self.outer {
            let _ = write!(out, "{}", r.iter);
            for t in &r.theta {
                let _ = write!(out, ",{t}");
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                r.lambda, r.objective, r.constraint_residual
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn moments(model: &GaussianMixture, theta: &[f64], lambda: f64) -> Result<BallMoments> {
    model.ball_moments(&Ball::new(theta.to_vec(), lambda)?)
}

fn check_policy_dim(model: &GaussianMixture, theta: &[f64]) -> Result<()> {
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// `P(U = 1) = 1 - P(|X - theta|^2 <= lambda)`.
pub fn transmit_prob(model: &GaussianMixture, policy: &Policy) -> Result<f64> {
    Ok(1.0 - model.mass_in_ball(&policy.ball())?)
}

const MAX_BRACKET_DOUBLINGS: usize = 200;
const MAX_ROOT_ITERS: usize = 400;

/// Finds `lambda` with `P(|X - theta|^2 > lambda) = target_kappa`.
///
/// The root is bracketed between 0 (where the silent mass is 0) and an upper
/// bound found by doubling, then refined inside the bracket. In one dimension
/// the mass is smooth in `lambda`, and Newton steps aimed at the middle of the
/// acceptance band are taken while they stay inside the bracket and keep
/// halving the residual. Otherwise, and always in higher dimensions, the
/// bracket is bisected. The returned `lambda` is the upper end of the bracket,
/// so the transmit probability never exceeds `target_kappa` and is within
/// `tol` of it whenever the mass is continuous.
pub fn solve_lambda(
    model: &GaussianMixture,
    theta: &[f64],
    target_kappa: f64,
    tol: f64,
) -> Result<f64> {
    solve_lambda_near(model, theta, target_kappa, tol, None)
}

/// [`solve_lambda`] starting from `guess`, typically the previous threshold.
pub fn solve_lambda_near(
    model: &GaussianMixture,
    theta: &[f64],
    target_kappa: f64,
    tol: f64,
    guess: Option<f64>,
) -> Result<f64> {
    check_policy_dim(model, theta)?;
    if !(target_kappa > 0.0 && target_kappa < 1.0) {
        return Err(Error::param("target_kappa", format!("{target_kappa} not in (0, 1)")));
    }
    let want = 1.0 - target_kappa;
    let mass = |l: f64| moments(model, theta, l);

    let start = guess
        .filter(|g| g.is_finite() && *g > 0.0)
        .unwrap_or_else(|| (model.variance_total() + dist_sq(theta, &model.mean())).max(1e-12));
    let mut lo = 0.0;
    let (mut x, mut at_x) = (start, mass(start)?);
    let mut doublings = 0;
    while at_x.mass < want {
        lo = x;
        x *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !x.is_finite() {
            return Err(Error::BracketExpansion { upper: x });
        }
        at_x = mass(x)?;
    }
    let (mut hi, mut at_hi) = (x, at_x.clone());

    let aim = want + 0.5 * tol;
    let mut last_resid = f64::INFINITY;
    for _ in 0..MAX_ROOT_ITERS {
        if at_hi.mass - want <= tol || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let resid = (at_x.mass - aim).abs();
        let newton = if resid <= 0.5 * last_resid {
            at_x.mass_slope
                .filter(|s| *s > 0.0 && s.is_finite())
                .map(|s| x - (at_x.mass - aim) / s)
                .filter(|c| *c > lo && *c < hi)
        } else {
            None
        };
        last_resid = resid;
        x = newton.unwrap_or(0.5 * (lo + hi));
        at_x = mass(x)?;
        if at_x.mass >= want {
            hi = x;
            at_hi = at_x.clone();
        } else {
            lo = x;
        }
    }
    Ok(hi)
}

/// `g(theta) = -2 E[(X - theta) 1(|X - theta|^2 > lambda)]`, a subgradient of
/// `E[max(|X - theta|^2, lambda)]`.
pub fn subgradient(model: &GaussianMixture, policy: &Policy) -> Result<Vec<f64>> {
    check_policy_dim(model, &policy.theta)?;
    let mo = model.ball_moments(&policy.ball())?;
    let mean = model.mean();
    let out = 1.0 - mo.mass;
    Ok(mean
        .iter()
        .zip(&mo.first)
        .zip(&policy.theta)
        .map(|((m, pm), t)| -2.0 * ((m - pm) - t * out))
        .collect())
}

/// One convex-concave step at fixed `lambda`.
pub fn ccp_step(model: &GaussianMixture, theta: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_policy_dim(model, theta)?;
    let mo = moments(model, theta, lambda)?;
    Ok(ccp_update(&mo, theta))
}

fn ccp_update(mo: &BallMoments, theta: &[f64]) -> Vec<f64> {
    let out = 1.0 - mo.mass;
    mo.first.iter().zip(theta).map(|(pm, t)| pm + t * out).collect()
}

fn literal_update(mo: &BallMoments, theta: &[f64], kappa: f64) -> Vec<f64> {
    mo.first.iter().zip(theta).map(|(pm, t)| pm - kappa * t).collect()
}

/// Iterates the inner update from `theta_init` at fixed `lambda` until the
/// step is at most `theta_tol` or `max_inner_iters` steps were taken.
pub fn ccp_solve(
    model: &GaussianMixture,
    theta_init: &[f64],
    lambda: f64,
    config: &SolverConfig,
) -> Result<(Vec<f64>, InnerTrace)> {
    check_policy_dim(model, theta_init)?;
    if theta_init.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("theta_init", "must be finite"));
    }
    let mut theta = theta_init.to_vec();
    let mut trace = InnerTrace {
        lambda,
        thetas: vec![theta.clone()],
        converged: false,
    };
    for _ in 0..config.max_inner_iters {
        let mo = moments(model, &theta, lambda)?;
        let next = match config.update {
            InnerUpdate::Ccp => ccp_update(&mo, &theta),
            InnerUpdate::Literal => literal_update(&mo, &theta, config.target_kappa()),
        };
        if next.iter().any(|t| !t.is_finite()) {
            break;
        }
        let step = dist_sq(&next, &theta).sqrt();
        theta = next;
        trace.thetas.push(theta.clone());
        if step <= config.theta_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((theta, trace))
}

fn record(
    model: &GaussianMixture,
    iter: usize,
    policy: &Policy,
    config: &SolverConfig,
) -> Result<OuterRecord> {
    let mo = model.ball_moments(&policy.ball())?;
    let transmit = 1.0 - mo.mass;
    Ok(OuterRecord {
        iter,
        theta: policy.theta.clone(),
        lambda: policy.lambda,
        objective: regime_objective(model, &mo, config.kappa_bar),
        constraint_residual: transmit - config.target_kappa(),
    })
}

/// Consecutive outer iterations without a new smallest `theta` move (by the
/// factor `STALL_RATIO`) before the solver falls back to single inner steps.
const STALL_LIMIT: usize = 6;
const STALL_RATIO: f64 = 0.9;

/// Alternates inner solves for `theta` with root solves for `lambda`,
/// starting from the model mean (or `config.theta_init`).
///
/// Full inner solves can settle into a cycle between two thresholds. When the
/// outer `theta` move fails to shrink for a few consecutive iterations, each
/// inner solve is cut to one step, so every `theta` update is followed by a
/// fresh `lambda`; the pair then descends the constrained objective instead of
/// jumping between basins.
pub fn alternating_solve(
    model: &GaussianMixture,
    config: &SolverConfig,
) -> Result<(Policy, SolveTrace)> {
    config.validate()?;
    let target = config.target_kappa();
    let theta0 = match &config.theta_init {
        Some(t) => {
            check_policy_dim(model, t)?;
            t.clone()
        }
        None => model.mean(),
    };
    let lambda0 = solve_lambda(model, &theta0, target, config.lambda_tol)?;
    let mut policy = Policy::new(theta0, lambda0)?;
    let mut trace = SolveTrace {
        outer: vec![record(model, 0, &policy, config)?],
        inner: Vec::new(),
        converged: false,
        interleaved_from: None,
    };
    let single = SolverConfig {
        max_inner_iters: 1,
        ..config.clone()
    };
    let (mut best_move, mut stalls) = (f64::INFINITY, 0);
    for k in 1..=config.max_outer_iters {
        let interleaved = trace.interleaved_from.is_some();
        let inner_config = if interleaved { &single } else { config };
        let (theta, inner) = ccp_solve(model, &policy.theta, policy.lambda, inner_config)?;
        let inner_ok = interleaved || inner.converged;
        trace.inner.push(inner);
        let lambda =
            solve_lambda_near(model, &theta, target, config.lambda_tol, Some(policy.lambda))?;
        let d_theta = dist_sq(&theta, &policy.theta).sqrt();
        let d_lambda = (lambda - policy.lambda).abs();
        policy = Policy::new(theta, lambda)?;
        trace.outer.push(record(model, k, &policy, config)?);
        if inner_ok
            && d_theta <= config.theta_tol
            && d_lambda <= config.lambda_tol * lambda.max(1.0)
        {
            trace.converged = true;
            break;
        }
        if !interleaved {
            if d_theta <= STALL_RATIO * best_move {
                best_move = d_theta;
                stalls = 0;
            } else {
                stalls += 1;
            }
            if stalls >= STALL_LIMIT {
                trace.interleaved_from = Some(k);
            }
        }
    }
    Ok((policy, trace))
}

/// Asymptotic normalized error of a policy on a channel with capacity
/// fraction `kappa_bar`: the silent-region second moment when the transmit
/// probability fits under capacity, otherwise the total variance.
pub fn objective(model: &GaussianMixture, policy: &Policy, kappa_bar: f64) -> Result<f64> {
    check_policy_dim(model, &policy.theta)?;
    let mo = model.ball_moments(&policy.ball())?;
    Ok(regime_objective(model, &mo, kappa_bar))
}

fn regime_objective(model: &GaussianMixture, mo: &BallMoments, kappa_bar: f64) -> f64 {
    if 1.0 - mo.mass <= kappa_bar {
        mo.second
    } else {
        model.variance_total()
    }
}

/// `E[min(|X - theta|^2, lambda)] - lambda * kappa_bar`.
pub fn lagrangian_tilde(
    model: &GaussianMixture,
    theta: &[f64],
    lambda: f64,
    kappa_bar: f64,
) -> Result<f64> {
    check_policy_dim(model, theta)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let mo = moments(model, theta, lambda)?;
    Ok(mo.second + lambda * (1.0 - mo.mass) - lambda * kappa_bar)
}

/// Gradient of [`lagrangian_tilde`] in `theta`, `2 (theta - E[X]) - g(theta)`.
pub fn lagrangian_gradient(model: &GaussianMixture, policy: &Policy) -> Result<Vec<f64>> {
    let g = subgradient(model, policy)?;
    Ok(model
        .mean()
        .iter()
        .zip(&policy.theta)
        .zip(&g)
        .map(|((m, t), gi)| 2.0 * (t - m) - gi)
        .collect())
}

/// On-disk policy together with the channel it was designed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub kappa_bar: f64,
    pub delta: f64,
}

impl PolicyFile {
    pub fn new(policy: &Policy, kappa_bar: f64, delta: f64) -> Self {
        Self {
            theta: policy.theta.clone(),
            lambda: policy.lambda,
            kappa_bar,
            delta,
        }
    }

    pub fn policy(&self) -> Result<Policy> {
        Policy::new(self.theta.clone(), self.lambda)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
