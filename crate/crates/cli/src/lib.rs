//! Command-line front end for the `cirbench` experiments.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "cirbench",
    version,
    about = "Strong-convergence experiments for CIR discretisations"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. They override `--config`, which
/// overrides the fig1h defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// key=value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Named parameter set (fig1a..fig1h)
    #[arg(long, global = true)]
    pub preset: Option<String>,

    /// Feller ratio; for simulations k is set to ν ξ²/(2θ)
    #[arg(long, global = true)]
    pub nu: Option<f64>,

    #[arg(long, global = true)]
    pub k: Option<f64>,

    #[arg(long, global = true)]
    pub theta: Option<f64>,

    #[arg(long, global = true)]
    pub xi: Option<f64>,

    #[arg(long, global = true)]
    pub v0: Option<f64>,

    #[arg(long, global = true)]
    pub horizon: Option<f64>,

    /// Comma-separated step counts
    #[arg(long = "n-list", global = true, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,

    /// Comma-separated norm or moment orders
    #[arg(
        long = "p",
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub p: Option<Vec<f64>>,

    #[arg(long, global = true)]
    pub paths: Option<u64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (results do not depend on this)
    #[arg(long, global = true, env = "CIRBENCH_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print trajectories of a scheme
    Simulate {
        #[arg(long)]
        scheme: Option<String>,
        /// Number of time steps
        #[arg(long)]
        n: Option<usize>,
    },
    /// Strong error table for every N in --n-list
    StrongError(ErrorArgs),
    /// Strong error table plus fitted log-log slopes
    Rate {
        #[command(flatten)]
        error: ErrorArgs,
        /// Also write (log2 N, log2 error) blocks to this file
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Frequencies of non-positive FTE iterates against the theoretical bound
    Negativity,
    /// Moment estimates across grid sizes
    Moments {
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Closed-form constants, sequences and bounds
    Theory {
        #[command(subcommand)]
        action: TheoryAction,
    },
    /// List the built-in presets
    Presets,
}

#[derive(Debug, Clone, Args)]
pub struct ErrorArgs {
    /// Compare against an N·M-step reference instead of the N vs 2N proxy
    #[arg(long)]
    pub reference: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum TheoryAction {
    /// ν̄ for the given (or configured) Feller ratio
    NuBar,
    /// ν, ν̄, φ_ν, η_ν and ε
    Constants,
    /// c_j and both constructions of a_j, with the c_j upper bound
    Sequences {
        /// Step count N (defaults to the first entry of --n-list)
        #[arg(long)]
        n: Option<usize>,
        /// Override α (defaults to α_N = (1 − kT/N)/2)
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Upper bound on the negativity probability
    Bound {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Admissible β interval for a moment order q
    BetaInterval {
        #[arg(long)]
        q: f64,
    },
    /// Closed-form Hurwitz zeta upper bound and truncated sum
    Zeta {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        q: f64,
    },
}

/// Builds the effective configuration: fig1h defaults, then `--config`,
/// then `--preset`, then the individual flags.
pub fn resolve_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        cfg.merge_str(&text)
            .with_context(|| format!("in config file {}", path.display()))?;
    }
    if let Some(name) = &common.preset {
        cfg.apply_preset(name)?;
    }
    let p = &mut cfg.params;
    if let Some(v) = common.k {
        p.k = v;
    }
    if let Some(v) = common.theta {
        p.theta = v;
    }
    if let Some(v) = common.xi {
        p.xi = v;
    }
    if let Some(v) = common.v0 {
        p.v0 = v;
    }
    if let Some(v) = common.horizon {
        p.horizon = v;
    }
    if let Some(nu) = common.nu {
        p.k = nu * p.xi * p.xi / (2.0 * p.theta);
    }
    if let Some(list) = &common.n_list {
        cfg.n_list = list.clone();
    }
    if let Some(list) = &common.p {
        cfg.p_list = list.clone();
    }
    if let Some(v) = common.paths {
        cfg.paths = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.out = Some(v.clone());
    }
    Ok(cfg)
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Diagnostics go to `stderr`; results to `stdout` unless `--out` is given.
pub fn run<I, T>(argv: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<()> {
    let cfg = resolve_config(&cli.common)?;
    let threads = cli.common.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot build worker pool")?;
    pool.install(|| commands::dispatch(&cli.command, cfg, &cli.common, stdout))
}
