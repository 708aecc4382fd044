use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use freeknot_cli::config::{Experiment, RunConfig, Settings};
use freeknot_cli::{execute, RunError};

/// Free-knot spline approximation of stochastic processes.
#[derive(Parser, Debug)]
#[command(name = "freeknot", version)]
struct Cli {
    /// One of: tau, rate, avg-knots, xi-check, smalldev, negmom, eta-kappa,
    /// diffusion, approximate-file. May also come from the config file.
    experiment: Option<String>,

    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let file = cli.config.as_deref().map(Settings::from_file).transpose()?;
    let cfg = RunConfig::resolve(cli.experiment.as_deref(), file.as_ref(), &cli.settings)?;
    if cli.settings.seed.is_none() && file.as_ref().and_then(|f| f.seed).is_none() {
        eprintln!("seed: {}", cfg.mc.seed);
    }
    let (report, result) = execute(&cfg);
    let written = result?;
    if cfg.experiment == Experiment::ApproximateFile {
        for key in ["pieces", "gamma", "error"] {
            if let Some(e) = report.estimates.get(key) {
                println!("{key}: {}", e.value);
            }
        }
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
