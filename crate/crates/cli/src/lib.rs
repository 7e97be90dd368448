//! The `homog` command line.

pub mod commands;
pub mod config;
pub mod output;
pub mod reproduce;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use homog_core::cell::{BruteForceMode, Orientation};
use homog_core::states::Potential;

use crate::config::{ConfigError, RunConfig, SolveMethod};
use crate::output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "homog", version, about = "Experiments for oscillating non-local double-integral energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact energy of a step function read from JSON.
    Energy,
    /// CSV of the closed-form cell minimum over a t grid.
    GammaTable,
    /// Solve the discretized cell problem.
    CellSolve,
    /// Exhaustive search against arc profiles for every mass k/n.
    CellVerify,
    /// Recovery and flat sequences for a constant target.
    GammaLimit,
    /// Two-scale pairings of a tiled cell profile.
    TwoScale,
    /// Non-representability certificate.
    NonRep,
    /// Truncated potential threshold experiment.
    FmThreshold,
    /// Every acceptance check, with a consolidated report.
    ReproduceAll,
}

/// Flags overriding fields of the configuration file.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; overrides HOMOG_THREADS and the file.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub t_steps: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
    #[arg(long = "m-grid", global = true, value_delimiter = ',')]
    pub m_grid: Option<Vec<f64>>,
    /// Truncation level; selects the finite potential.
    #[arg(long = "m", global = true)]
    pub m: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub brute_n: Option<usize>,
    #[arg(long, global = true, value_parser = parse_method)]
    pub method: Option<SolveMethod>,
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<BruteForceMode>,
    #[arg(long, global = true, value_parser = parse_orientation)]
    pub orientation: Option<Orientation>,
    #[arg(long, global = true)]
    pub state: Option<PathBuf>,
    /// Explicit kernel JSON file ({"breakpoints": [...], "values": [...]}).
    #[arg(long, global = true)]
    pub kernel: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quadrature_n: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub deviations: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub instances: Option<usize>,
}

fn parse_method(s: &str) -> Result<SolveMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<BruteForceMode, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::GammaTable => "gamma-table",
            Command::CellSolve => "cell-solve",
            Command::CellVerify => "cell-verify",
            Command::GammaLimit => "gamma-limit",
            Command::TwoScale => "two-scale",
            Command::NonRep => "non-rep",
            Command::FmThreshold => "fm-threshold",
            Command::ReproduceAll => "reproduce-all",
        }
    }
}

/// Loads the file named by `--config` and applies every flag on top.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(alpha, beta, lambda, eps, eps_grid, t, t_steps, s_grid, m_grid, n, brute_n, method, orientation, deviations, instances, seed, output_dir);
    if let Some(mode) = args.mode {
        cfg.brute_mode = mode;
    }
    if let Some(m) = args.m {
        cfg.potential = Potential::finite(m).map_err(|e| ConfigError::new("--m", e.to_string()))?;
    }
    if args.state.is_some() {
        cfg.state = args.state.clone();
    }
    if args.quadrature_n.is_some() {
        cfg.quadrature_n = args.quadrature_n;
    }
    if let Some(path) = &args.kernel {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--kernel", format!("cannot read {}: {e}", path.display())))?;
        cfg.kernel =
            Some(serde_json::from_str(&text).map_err(|e| ConfigError::new("--kernel", format!("{}: {e}", path.display())))?);
    }
    cfg.threads = cfg.resolve_threads(args.threads)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    let result = pool.install(|| {
        let out = Outputs::new(&cfg.output_dir)?;
        match cli.command {
            Command::Energy => commands::energy(&cfg, &out),
            Command::GammaTable => commands::gamma_table(&cfg, &out),
            Command::CellSolve => commands::cell_solve(&cfg, &out),
            Command::CellVerify => commands::cell_verify(&cfg, &out),
            Command::GammaLimit => commands::gamma_limit(&cfg, &out),
            Command::TwoScale => commands::two_scale(&cfg, &out),
            Command::NonRep => commands::non_rep(&cfg, &out),
            Command::FmThreshold => commands::fm_threshold(&cfg, &out),
            Command::ReproduceAll => commands::reproduce_all(&cfg, &out),
        }
    });
    match result {
        Ok(done) => {
            println!("{}: {}", cli.command.name(), done.summary);
            done.exit_code
        }
        Err(e) => {
            eprintln!("error: {}: {e:#}", cli.command.name());
            1
        }
    }
}
