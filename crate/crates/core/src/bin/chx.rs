use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use chx::harness::{run, ExperimentConfig, EXPERIMENTS};

/// Run one experiment of the suite and write its manifest, series and dumps.
#[derive(Parser)]
#[command(name = "chx", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
    experiment: String,
    /// TOML config with an optional `[<experiment>]` parameter table.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default `out/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo paths or corpus size.
    #[arg(long)]
    mc: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = std::fs::read_to_string(&cli.config)
        .map_err(|e| chx::Error::from(e).context(format!("reading {}", cli.config.display())))
        .and_then(|text| ExperimentConfig::for_experiment(&cli.experiment, &text))
        .and_then(|c| c.with_overrides(cli.seed, cli.mc, cli.out));
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(m) => {
            for v in &m.verdicts {
                println!("{} {}: {:e} ({}, tolerance {:e})", if v.passed { "PASS" } else { "FAIL" }, v.name, v.value, v.rule, v.tolerance);
            }
            println!("{} in {:.1}s", m.experiment, m.wall_clock_seconds);
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
