use std::path::PathBuf;
use std::process::ExitCode;

use biot_guarantee_cli::{
    run_experiment, write_results, CliError, Engine, ExperimentSpec, Format, RunOptions,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Detection guarantees under joint device and DSA attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and emit one row per grid point.
    Run {
        spec: PathBuf,
        /// Comma-separated subset of guarantee,pgd,mc.
        #[arg(long, value_delimiter = ',')]
        engines: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        starts: Option<usize>,
        /// Outcome-space cap.
        #[arg(long)]
        cap: Option<u64>,
        /// Fill the wall_time_s column.
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        continue_on_error: bool,
    },
}

fn parse_engines(list: &[String]) -> Result<Vec<Engine>, String> {
    let mut engines = Vec::new();
    for s in list.iter().filter(|s| !s.trim().is_empty()) {
        let e = s.parse()?;
        if !engines.contains(&e) {
            engines.push(e);
        }
    }
    Ok(engines)
}

fn main() -> ExitCode {
    let Command::Run {
        spec,
        engines,
        out,
        format,
        seed,
        epsilon,
        starts,
        cap,
        timings,
        continue_on_error,
    } = Cli::parse().command;
    let run = || -> Result<(), CliError> {
        let mut s = ExperimentSpec::load(&spec)?;
        if let Some(list) = &engines {
            s.engines = parse_engines(list).unwrap_or_else(|msg| {
                eprintln!("error: {msg}");
                std::process::exit(2);
            });
        }
        if out.is_some() {
            s.output = out.clone();
        }
        s.format = format.unwrap_or(s.format);
        s.seed = seed.unwrap_or(s.seed);
        if let Some(eps) = epsilon {
            s.solver.epsilon = eps;
        }
        if let Some(n) = starts {
            s.pgd.num_starts = n;
        }
        if cap.is_some() {
            s.max_outcomes = cap;
        }
        s.continue_on_error |= continue_on_error;
        let report = run_experiment(&s, RunOptions { timings })?;
        write_results(&report.table, s.format, s.output.as_deref())?;
        if report.failures.is_empty() {
            return Ok(());
        }
        for (index, err) in &report.failures {
            eprintln!("grid point {index}: {err}");
        }
        Err(CliError::PartialFailure {
            failed: report.failures.len(),
            total: report.failures.len() + report.table.rows.len(),
        })
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
