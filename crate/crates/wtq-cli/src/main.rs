use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use wtq_cli::output::{write_error, write_report, RunInfo};
use wtq_cli::{execute, Cli, CliError, ExperimentConfig};

fn run(cli: &Cli) -> Result<(), CliError> {
    let workers = cli.global.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut cfg = match &cli.global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.global.seed.is_some() {
        cfg.seed = cli.global.seed;
    }
    let start = Instant::now();
    let report = execute(&cli.command, &cfg, &cli.global)?;
    let info = RunInfo {
        command: cli.command.name(),
        config: serde_json::to_value(&cfg).unwrap_or_default(),
        seed: cfg.seed,
        workers,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let written = write_report(&report, &cli.global.out, &info)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = write_error(&cli.global.out, &e);
            eprintln!("{}", serde_json::to_string(&e.to_json()).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
