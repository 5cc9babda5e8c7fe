use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use quench_lab::{init_threads, output_dir, run_scenario, ExperimentConfig, LabError, Scenario};

/// Spectra, reduced coefficients and simulations of quenched
/// Cahn-Hilliard fronts.
#[derive(Debug, Parser)]
#[command(name = "quench-lab", version)]
struct Cli {
    scenario: Scenario,
    /// TOML file with [model], [grid], [numerics] and [scenario] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to scenario.out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the config file. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<(), LabError> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path, &cli.overrides)?,
        None => ExperimentConfig::from_str_with("", &cli.overrides)?,
    };
    let dir = output_dir(&cfg, cli.out);
    let manifest = run_scenario(cli.scenario, &cfg, &dir)?;
    println!(
        "{}: {} files in {} ({:.1} s)",
        manifest.scenario,
        manifest.files.len(),
        dir.display(),
        manifest.total_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quench-lab: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
