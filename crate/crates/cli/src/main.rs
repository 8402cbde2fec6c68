use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::RunConfig;

/// Continuous photodetection: jump-coefficient tables, counting statistics,
/// waiting times and verification against independent oracles.
#[derive(Parser)]
#[command(name = "photodetection", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Jump coefficients J^(B), J^(D), J^(E) over n with fitted exponents.
    QjsTable(Common),
    /// Bright/dark rates and signal-to-noise ratio over a bias grid.
    SnrScan(Common),
    /// Bright rate over a wavelength grid for one or more biases.
    Brightness(Common),
    /// Mean counts and K_t for both models over a time grid.
    Counts(Common),
    /// Mean waiting time and cavity photon number over a time grid.
    Wt(Common),
    /// Oracle-versus-closed-form checks.
    Verify(Common),
    /// Print the parameter registry with defaults.
    Defaults,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` parameter file.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Output file; relative paths resolve against $PHOTODETECTION_OUT_DIR when set.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid evaluations.
    #[arg(long)]
    threads: Option<usize>,
    /// Parameter overrides, `--key value` or `--key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

/// Exit codes: 0 success, 1 validation, 2 numerical failure, 3 verification failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<photodetection::Error> for CliError {
    fn from(e: photodetection::Error) -> Self {
        use photodetection::Error as E;
        match e {
            E::InvalidArgument(_) | E::TruncationTooSmall { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, common) = match cli.cmd {
        Cmd::Defaults => {
            print!("{}", config::registry());
            return Ok(());
        }
        Cmd::QjsTable(c) => ("qjs-table", c),
        Cmd::SnrScan(c) => ("snr-scan", c),
        Cmd::Brightness(c) => ("brightness", c),
        Cmd::Counts(c) => ("counts", c),
        Cmd::Wt(c) => ("wt", c),
        Cmd::Verify(c) => ("verify", c),
    };
    let mut cfg = RunConfig::resolve(
        common.config.as_deref(),
        &common.overrides,
        common.out.as_deref(),
        common.format,
        common.seed,
    )?;
    let threads = common.threads.or(cfg.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    cfg.threads = threads;
    match name {
        "qjs-table" => commands::qjs_table(&cfg),
        "snr-scan" => commands::snr_scan(&cfg),
        "brightness" => commands::brightness(&cfg),
        "counts" => commands::counts(&cfg),
        "wt" => commands::wt(&cfg),
        _ => commands::verify(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
