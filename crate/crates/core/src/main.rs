use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fluctlat::cli_harness::{run_experiment, ExperimentConfig, Mode};
use fluctlat::Error;

/// Boundary-driven lattice gas experiments: simulation, hydrodynamics and
/// rate functionals.
#[derive(Debug, Parser)]
#[command(name = "fluctlat", version)]
struct Cli {
    /// One of simulate, hydro, rate-eval, contract, oracle, validate.
    mode: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let mode: Mode = cli.mode.parse()?;
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None if mode == Mode::Validate => ExperimentConfig::new(mode),
        None => return Err(Error::Usage(format!("mode {mode} needs --config"))),
    };
    if config.mode != mode {
        return Err(Error::Usage(format!(
            "command line asks for mode {mode} but the config file says {}",
            config.mode
        )));
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(r) = cli.replicas {
        config.set("replicas", &r.to_string()).map_err(|e| Error::Usage(e.to_string()))?;
    }
    let report = run_experiment(&config, &cli.out)?;
    if mode == Mode::Validate {
        for c in report.summary["criteria"].as_array().into_iter().flatten() {
            let verdict = if c["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            println!("{verdict} criterion {} ({}): {}", c["id"], c["name"].as_str().unwrap_or(""), c["detail"].as_str().unwrap_or(""));
        }
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("fluctlat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
