use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use double_irs::harness::emit::{emit, render, Format};
use double_irs::harness::{load_scenario, load_sweep, preset, run_sweep, run_validation, solve_row, Algorithm, ResultRow};
use double_irs::optimizer::DEFAULT_EPS;
use double_irs::Result;

#[derive(Parser)]
#[command(name = "double-irs", version, about = "Capacity of double-IRS aided MIMO links under line of sight")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one algorithm.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "algorithm1")]
        algo: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Run a sweep spec file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        format: Option<String>,
    },
    /// Run a named figure preset (fig4a ... fig7b).
    Figure {
        preset: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        format: Option<String>,
    },
    /// Run the identity and optimality self-checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn format_for(flag: Option<&str>, out: Option<&Path>) -> Result<Format> {
    match (flag, out) {
        (Some(f), _) => f.parse(),
        (None, Some(p)) => Ok(Format::from_path(p)),
        (None, None) => Ok(Format::Csv),
    }
}

fn write(rows: &[ResultRow], format: Format, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => emit(rows, format, p),
        None => {
            print!("{}", render(rows, format)?);
            Ok(())
        }
    }
}

fn report_failures(rows: &[ResultRow]) -> usize {
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows failed", rows.len());
    }
    failed
}

/// `Ok(true)` when every check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { config, algo, out, format } => {
            let format = format_for(format.as_deref(), out.as_deref())?;
            let algo: Algorithm = algo.parse()?;
            let s = load_scenario(&config)?;
            let row = solve_row(&s, algo, DEFAULT_EPS, 0.0, algo.name().to_string());
            if let Some(e) = &row.error {
                eprintln!("error: {e}");
            }
            let ok = row.error.is_none();
            write(&[row], format, out.as_deref())?;
            Ok(ok)
        }
        Command::Sweep { spec, out, format } => {
            let format = format_for(format.as_deref(), Some(&out))?;
            let rows = run_sweep(&load_sweep(&spec)?)?;
            report_failures(&rows);
            emit(&rows, format, &out)?;
            Ok(true)
        }
        Command::Figure { preset: name, out, format } => {
            let format = format_for(format.as_deref(), Some(&out))?;
            let mut rows = Vec::new();
            for spec in preset(&name)? {
                rows.extend(run_sweep(&spec)?);
            }
            report_failures(&rows);
            emit(&rows, format, &out)?;
            Ok(true)
        }
        Command::Validate { seed } => {
            let mut all = true;
            for c in run_validation(seed)? {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: worst {:.3e} (tolerance {:.0e})", c.name, c.worst, c.tolerance);
                all &= c.passed;
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

