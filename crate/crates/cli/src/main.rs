//! `teleport`: runs the ensemble-sampler experiments from JSON configs.
//!
//! Exit status is 0 on success, 1 for configuration or input problems and 2
//! for numerical failures (including a failed verification).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teleport_core::config::{Experiment, ExperimentConfig, FiniteVerifyConfig};
use teleport_core::diagnostics::{StatisticsOptions, DEFAULT_BURN_IN, DEFAULT_WINDOW_CONSTANT};
use teleport_core::experiments::{iat_from_csv, run_experiment, ExperimentOutput};
use teleport_core::output::json_with_provenance;
use teleport_core::Error;

#[derive(Parser)]
#[command(name = "teleport", version, about = "Teleporting-walker ensemble MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `output_dir`; default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact finite-state checks over a default sweep of random instances.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write verify.json here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Acceptance, teleport and autocorrelation statistics of a run-record CSV.
    Iat {
        record: PathBuf,
        #[arg(long)]
        n_walkers: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW_CONSTANT)]
        window_constant: f64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: f64,
    },
    /// Print a config with the reference parameter values for one kind.
    Template {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(Experiment::KINDS))]
        kind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn from_run(e: Error) -> Self {
        match e {
            Error::ConfigInvalid { .. } | Error::Io(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn write_artifacts(dir: &Path, out: &ExperimentOutput) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Config(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for a in &out.artifacts {
        fs::write(dir.join(&a.name), &a.contents).map_err(io)?;
    }
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let text =
        fs::read_to_string(config).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let output = run_experiment(&cfg).map_err(Failure::from_run)?;
    write_artifacts(&dir, &output)?;
    println!("{}", serde_json::to_string_pretty(&output.summary).expect("summary is JSON"));
    if output.summary.get("pass") == Some(&serde_json::Value::Bool(false)) {
        return Err(Failure::Numerical("verification failed".into()));
    }
    Ok(())
}

fn verify(seed: u64, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::new(seed, Experiment::FiniteVerify(FiniteVerifyConfig::default()));
    let output = run_experiment(&cfg).map_err(Failure::from_run)?;
    match out {
        Some(dir) => write_artifacts(&dir, &output)?,
        None => print!("{}", output.artifact("verify.json").expect("verify emits a report")),
    }
    let s = &output.summary;
    eprintln!(
        "spectral={} metropolized={} variance={} stationarity={} subset={}",
        s["spectral_pass"], s["metropolized_pass"], s["variance_pass"], s["stationarity_pass"], s["subset_stationarity_pass"]
    );
    if s["pass"] != serde_json::Value::Bool(true) {
        return Err(Failure::Numerical("verification failed".into()));
    }
    Ok(())
}

fn iat(record: &Path, n_walkers: usize, window_constant: f64, burn_in: f64) -> Result<(), Failure> {
    let text =
        fs::read_to_string(record).map_err(|e| Failure::Config(format!("{}: {e}", record.display())))?;
    let opts = StatisticsOptions {
        window_constant,
        burn_in,
    };
    let stats = iat_from_csv(&text, n_walkers, &opts).map_err(|e| Failure::Config(e.to_string()))?;
    let header = text.lines().next().and_then(teleport_core::output::parse_header);
    let (hash, seed) = header.unwrap_or_default();
    let json = json_with_provenance(&stats, &hash, seed).map_err(|e| Failure::Numerical(e.to_string()))?;
    print!("{json}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Verify { seed, out } => verify(seed, out),
        Command::Iat {
            record,
            n_walkers,
            window_constant,
            burn_in,
        } => iat(&record, n_walkers, window_constant, burn_in),
        Command::Template { kind, seed } => {
            let e = Experiment::template(&kind).expect("kind validated by clap");
            println!("{}", ExperimentConfig::new(seed, e).to_json());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical error: {m}");
            ExitCode::from(2)
        }
    }
}
