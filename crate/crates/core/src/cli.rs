//! `remest` command-line front end.
//!
//! Exit codes: 0 on success, 1 on bad input (unreadable or malformed files,
//! invalid parameters, degenerate samples), 2 when a solver run stopped at an
//! iteration cap. Output files are still written on exit code 2.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::density::GaussianMixture;
use crate::error::{Error, Result};
use crate::experiments::ExperimentSpec;
use crate::kde::{self, SampleBatch};
use crate::simulator::{self, ChannelSpec, SimulationReport};
use crate::solver::{self, InnerUpdate, Policy, PolicyFile, SolveTrace, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "remest", version, about = "Threshold policies for mean-field remote estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a policy for a known Gaussian-mixture model.
    Solve {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a kernel density estimate to a CSV batch.
    Fit {
        /// Headerless CSV, one sample per row.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a kernel density estimate and design a policy on it.
    Design {
        #[arg(long)]
        samples: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo simulation of the finite-n collision channel.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Policy JSON file as written by `solve` or `design`.
        #[arg(long)]
        policy: PathBuf,
        /// Number of agents; a comma-separated list gives one row per value.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run a capacity back-off sweep described by a JSON spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Report format; both files are written when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Channel capacity fraction.
    #[arg(long)]
    kappa: f64,
    /// Capacity back-off.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Initial centre, one value per dimension (comma-separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta_init: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = UpdateArg::Ccp)]
    update: UpdateArg,
    #[arg(long)]
    theta_tol: Option<f64>,
    #[arg(long)]
    lambda_tol: Option<f64>,
    #[arg(long)]
    max_outer_iters: Option<usize>,
    #[arg(long)]
    max_inner_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UpdateArg {
    Ccp,
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(self.kappa, self.delta)?;
        cfg.update = match self.update {
            UpdateArg::Ccp => InnerUpdate::Ccp,
            UpdateArg::Literal => InnerUpdate::Literal,
        };
        cfg.theta_init = self.theta_init.clone();
        if let Some(t) = self.theta_tol {
            cfg.theta_tol = t;
        }
        if let Some(t) = self.lambda_tol {
            cfg.lambda_tol = t;
        }
        if let Some(n) = self.max_outer_iters {
            cfg.max_outer_iters = n;
        }
        if let Some(n) = self.max_inner_iters {
            cfg.max_inner_iters = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Solve { model, solver, out } => {
            let config = solver.config()?;
            let model = GaussianMixture::load(&model)?;
            prepare_out(&out)?;
            let (policy, trace) = solver::alternating_solve(&model, &config)?;
            finish_design(&model, &policy, &trace, &config, &out)
        }
        Command::Fit { samples, out } => {
            let batch = SampleBatch::read_csv(&samples)?;
            prepare_out(&out)?;
            let (model, report) = kde::fit_with_bandwidth(&batch)?;
            model.save(out.join("model.json"))?;
            write_json(&out.join("bandwidth.json"), &report)?;
            println!("components = {}", model.num_components());
            println!("bandwidth = {}", join(&report.per_axis_h));
            Ok(EXIT_OK)
        }
        Command::Design { samples, solver, out } => {
            let config = solver.config()?;
            let batch = SampleBatch::read_csv(&samples)?;
            prepare_out(&out)?;
            let (model, report) = kde::fit_with_bandwidth(&batch)?;
            write_json(&out.join("bandwidth.json"), &report)?;
            let (policy, trace) = solver::alternating_solve(&model, &config)?;
            finish_design(&model, &policy, &trace, &config, &out)
        }
        Command::Simulate {
            model,
            policy,
            n,
            kappa,
            trials,
            seed,
            out,
            format,
        } => {
            let model = GaussianMixture::load(&model)?;
            let policy = PolicyFile::load(&policy)?.policy()?;
            if policy.theta.len() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    got: policy.theta.len(),
                });
            }
            for &ni in &n {
                ChannelSpec::new(ni, kappa)?;
            }
            if trials == 0 {
                return Err(Error::param("trials", "must be at least 1"));
            }
            prepare_out(&out)?;
            let reports = simulator::collision_curve(&model, &policy, kappa, &n, trials, seed)?;
            let json = format == Format::Json;
            let name = if json { "report.json" } else { "report.csv" };
            simulator::write_reports(&reports, out.join(name), json)?;
            println!("{}", SimulationReport::CSV_HEADER);
            for r in &reports {
                println!("{}", r.csv_row());
            }
            Ok(EXIT_OK)
        }
        Command::Experiment { spec, out, format } => {
            let spec = ExperimentSpec::load(&spec)?;
            prepare_out(&out)?;
            let report = crate::experiments::run_experiment(&spec)?;
            if format != Some(Format::Json) {
                report.write_csv(out.join("report.csv"))?;
            }
            if format != Some(Format::Csv) {
                report.write_json(out.join("report.json"))?;
            }
            print!("{}", report.to_csv());
            Ok(EXIT_OK)
        }
    }
}

fn finish_design(
    model: &GaussianMixture,
    policy: &Policy,
    trace: &SolveTrace,
    config: &SolverConfig,
    out: &Path,
) -> Result<i32> {
    PolicyFile::new(policy, config.kappa_bar, config.delta).save(out.join("policy.json"))?;
    trace.write_csv(out.join("trace.csv"))?;
    let objective = solver::objective(model, policy, config.kappa_bar)?;
    println!("theta = {}", join(&policy.theta));
    println!("lambda = {}", policy.lambda);
    println!("objective = {objective}");
    println!("transmit_prob = {}", solver::transmit_prob(model, policy)?);
    println!(
        "converged = {} (outer {}, inner {})",
        trace.converged,
        trace.outer_iterations(),
        trace.inner_iterations()
    );
    if trace.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: solver stopped at an iteration cap");
        Ok(EXIT_NONCONVERGED)
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}
