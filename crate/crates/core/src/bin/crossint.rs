use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crossint::experiment::{self, emit_report, ExperimentConfig, ExperimentKind};
use crossint::Error;

/// Convergence experiments for TT-X, Fourier-TT and Monte Carlo integration.
#[derive(Parser, Debug)]
#[command(name = "crossint", version)]
struct Cli {
    /// gauss-ttx, basket-ttx, basket-fourier, basket-mc or report.
    #[arg(value_parser = parse_kind)]
    experiment: ExperimentKind,

    /// `key = value` config file.
    #[arg(long)]
    config: PathBuf,

    #[arg(long, default_value_t = experiment::DEFAULT_SEED)]
    seed: u64,

    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,

    /// CSV output path; the text table goes next to it. Defaults to
    /// `<experiment>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Wall-clock budget per sweep.
    #[arg(long, default_value_t = experiment::DEFAULT_BUDGET_SECONDS)]
    budget_seconds: f64,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_TRUNCATED: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Unsupported(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(truncated) if truncated => ExitCode::from(EXIT_TRUNCATED),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> crossint::Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up thread pool: {e}")))?;
    }
    let mut cfg = ExperimentConfig::from_file(cli.experiment, &cli.config)?;
    cfg.seed = cli.seed;
    cfg.budget_seconds = cli.budget_seconds;
    cfg.out_path = Some(
        cli.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cli.experiment))),
    );
    cfg.validate()?;

    let out = experiment::run(&cfg, true)?;
    if out.records.is_empty() && out.truncated {
        for note in &out.notes {
            eprintln!("{note}");
        }
        return Ok(true);
    }
    let path = cfg.out_path.as_ref().expect("set above");
    let table = emit_report(&out.records, path, &out.notes)?;
    for note in &out.notes {
        eprintln!("{note}");
    }
    eprintln!("wrote {} and {}", path.display(), table.display());
    Ok(out.truncated)
}
