//! Threshold transmission policies for remote estimation over a collision
//! channel in the mean-field regime.
//!
//! Many sensors observe iid vectors `X ~ f` and share a channel that decodes
//! at most a fraction `kappa_bar` of simultaneous transmissions. Each sensor
//! stays silent while `|X - theta|^2 <= lambda` and transmits otherwise. This
//! crate
//!
//! - evaluates the densities and ball integrals involved ([`density`]),
//! - fits Gaussian kernel density estimates from samples ([`kde`]),
//! - designs `(theta, lambda)` with the convex-concave procedure ([`solver`]),
//! - checks the infinite-population predictions with a finite Monte Carlo
//!   simulator ([`simulator`]),
//! - runs the capacity back-off sample-complexity sweep ([`experiments`]).
//!
//! The `remest` binary wraps these as subcommands ([`cli`]).

pub mod cli;
pub mod density;
pub mod error;
pub mod experiments;
pub mod kde;
mod normal;
pub mod seeding;
pub mod simulator;
pub mod solver;

pub use density::{Ball, BallMoments, GaussianComponent, GaussianMixture};
pub use error::{Error, Result};
pub use kde::{BandwidthReport, SampleBatch};
pub use solver::{InnerUpdate, Policy, SolveTrace, SolverConfig};
