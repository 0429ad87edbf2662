//! `ultramorse`: run Galerkin-ladder Morse computations from a config file.
//!
//! Exit codes: 0 success, 1 bad input or I/O, 2 Morse-relation violation (or
//! division by zero in `hyper`), 3 degenerate level, 4 failed sweep point.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::EXIT_INPUT;
use config::{parse_list, Overrides};

#[derive(Debug, Parser)]
#[command(name = "ultramorse", version, about = "Morse relations on a ladder of Galerkin levels")]
struct Cli {
    /// Base RNG seed for Newton starts
    #[arg(long, global = true, env = "ULTRAMORSE_SEED")]
    seed: Option<u64>,
    /// Directory for JSON and CSV output
    #[arg(long, global = true, env = "ULTRAMORSE_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Comma-separated level dimensions, e.g. 4,8,16,32
    #[arg(long, global = true, env = "ULTRAMORSE_LEVELS")]
    levels: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one ladder and write its trace
    Run { config: PathBuf },
    /// Run one ladder per mu value of a preset problem
    Sweep {
        config: PathBuf,
        /// Comma-separated mu values
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
    },
    /// Verify M = P + (1+t)Q with Q having natural coefficients
    Check { m: String, p: String },
    /// Evaluate a Levi-Civita series expression in `e`
    Hyper {
        expr: String,
        /// Truncation order
        #[arg(long, default_value_t = 10)]
        order: i32,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let overrides =
        Overrides { seed: cli.seed, out_dir: cli.out_dir, levels: cli.levels.as_deref().map(parse_list).transpose()? };
    match cli.command {
        Command::Run { config } => commands::cmd_run(&config, &overrides),
        Command::Sweep { config, mu } => commands::cmd_sweep(&config, &parse_list(&mu)?, &overrides),
        Command::Check { m, p } => commands::cmd_check(&m, &p),
        Command::Hyper { expr, order } => commands::cmd_hyper(&expr, order),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
