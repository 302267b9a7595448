//! `oumax`: command-line driver for kernels, normality checks, maximal scans,
//! bound certificates and Monte Carlo runs.
//!
//! Every subcommand reads an optional JSON configuration (`--config`), applies
//! command-line overrides, prints a JSON result to stdout (or `--output`) and,
//! where grids or samples are produced, writes them as CSV to `--csv`.
//!
//! Exit codes: 0 on success, 1 when a certification fails or a computation
//! cannot be carried out, 2 on usage errors and malformed configurations.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Comma-separated numbers, e.g. `1,0` or `2,3`.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

fn parse_list(text: &str) -> Result<List, String> {
    oumax::config::parse_number_list(text).map(List).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "oumax", version, about = "Ornstein-Uhlenbeck kernels, maximal operators and bound certificates")]
pub struct Cli {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "OUMAX_THREADS")]
    pub threads: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Write grid records or samples as CSV to this path.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Operator selection: rotation speeds of B = −I + R(Θ) with Q = I.
#[derive(Debug, Clone, Default, Args)]
pub struct Model {
    /// Rotation speeds Θ, e.g. `2,3` (overrides `params` in the config).
    #[arg(long, value_parser = parse_list)]
    pub theta: Option<List>,
    /// Dimension (default 2·len(Θ)).
    #[arg(long)]
    pub dim: Option<usize>,
}

/// A Gaussian bump f(y) = exp(−|y − c|²/(2w²)) used as test function.
#[derive(Debug, Clone, Args)]
pub struct Bump {
    /// Bump center (default: the origin).
    #[arg(long, value_parser = parse_list)]
    pub center: Option<List>,
    /// Bump width w.
    #[arg(long, default_value_t = 0.5)]
    pub width: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition kernel h_t(x, y) and, for block operators, its factors.
    Kernel {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        t: Option<f64>,
        /// Reparametrized time s ∈ (0, 1) instead of t.
        #[arg(long, conflicts_with = "t")]
        s: Option<f64>,
        #[arg(long, value_parser = parse_list)]
        x: Option<List>,
        #[arg(long, value_parser = parse_list)]
        y: Option<List>,
    },
    /// Orthogonal reduction R = g·R(Θ)·gᵀ of a skew-symmetric matrix.
    Canonical {
        /// The matrix as JSON rows, e.g. `[[0,1],[-1,0]]`; defaults to R of the configured operator.
        #[arg(long)]
        matrix: Option<String>,
        #[command(flatten)]
        model: Model,
    },
    /// Standard form and normality defects of an operator.
    Normality {
        #[command(flatten)]
        model: Model,
    },
    /// Building-block decomposition of a normal operator.
    Blocks {
        #[command(flatten)]
        model: Model,
    },
    /// H_t f(x) for a Gaussian bump by quadrature, with the closed form.
    Apply {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_parser = parse_list)]
        x: Option<List>,
        #[command(flatten)]
        bump: Bump,
    },
    /// Truncated maximal function sup_{t ≤ T} |H_t f(x)| and its local/global parts.
    Maximal {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_parser = parse_list)]
        x: Option<List>,
        #[arg(long = "tmax", alias = "t-max")]
        t_max: Option<f64>,
        /// Time-grid points per decade of s.
        #[arg(long, default_value_t = 100)]
        per_decade: usize,
        #[command(flatten)]
        bump: Bump,
    },
    /// Local Gaussian bound on the diagonal region.
    CertifyLocal {
        #[command(flatten)]
        model: Model,
    },
    /// Global bound for small times s ≤ s_max.
    CertifyGlobal {
        #[command(flatten)]
        model: Model,
        #[arg(long = "smax", alias = "s-max")]
        s_max: Option<f64>,
    },
    /// Global bound on the translates of I by multiples of the period.
    CertifyPeriodic {
        #[command(flatten)]
        model: Model,
    },
    /// Polynomial sign certificates and the comparison-operator bound.
    CertifyRegions {
        /// One of r5-small-time, r2-periodic, r3-periodic, comparison (default: all).
        #[arg(long)]
        region: Option<String>,
    },
    /// Empirical weak-type ratios on a sharpening family of bumps.
    WeakType {
        #[command(flatten)]
        model: Model,
        /// Bump center (default (0.5, 0, ...)).
        #[arg(long, value_parser = parse_list)]
        center: Option<List>,
        /// Number of family members, widths 2⁰ down to 2^{1−k}.
        #[arg(long, default_value_t = 7)]
        members: usize,
        #[arg(long = "tmax", alias = "t-max")]
        t_max: Option<f64>,
        /// Largest tolerated growth over the running maximum.
        #[arg(long, default_value_t = 1.2)]
        max_growth: f64,
    },
    /// Growth of sup_t h_t(x, 0) as x → 0.
    L1Probe {
        #[command(flatten)]
        model: Model,
        #[arg(long = "tmax", alias = "t-max")]
        t_max: Option<f64>,
        /// Radii in (0, 1] (default: 9 points from 1e-3 to 1e-1).
        #[arg(long, value_parser = parse_list)]
        radii: Option<List>,
        #[arg(long, default_value_t = 200)]
        per_decade: usize,
    },
    /// Exact draws of the process: a path at `--times` or n transitions at `--t`.
    Simulate {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_parser = parse_list)]
        x: Option<List>,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_parser = parse_list)]
        times: Option<List>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Moment convergence of the law at time t to the invariant measure.
    Ergodic {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_parser = parse_list)]
        times: Option<List>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Start from the origin (default) or from draws of the invariant measure.
        #[arg(long)]
        stationary: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("oumax: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
