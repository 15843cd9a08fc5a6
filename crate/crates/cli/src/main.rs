use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tmsafe::config::{ConfigError, ScenarioSpec};
use tmsafe::pipeline::{self, PipelineError, SafetyMap};

/// Safety maps for smooth feedback controllers from Taylor-polynomial event
/// maps, domain splitting and interval bounds.
#[derive(Parser)]
#[command(name = "tmsafe", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the safety map for a scenario config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Threads for the splitting recursion; the map does not depend on it.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Recorded in the map; verification itself draws no random numbers.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo containment check of a safety map.
    McCheck {
        #[arg(long)]
        map: PathBuf,
        /// Samples per subdomain.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check against the polynomial bounds alone, without the remainder.
        #[arg(long)]
        no_remainder: bool,
        /// Write the full JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flatten a safety map into CSV rows for plotting.
    PlotData {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Internal(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(c) => Failure::Config(c.to_string()),
            PipelineError::Internal(m) => Failure::Internal(m),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn read_map(path: &Path) -> Result<SafetyMap, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(SafetyMap::from_json_str(&text)?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Verify { config, out, workers, seed } => {
            let spec = ScenarioSpec::load(&config)?;
            let map = pipeline::verify(&spec, workers, seed)?;
            write(&out, &map.to_json())?;
            let a = &map.aggregate;
            eprintln!(
                "{} subdomains: {} safe, {} unsafe, {} indeterminate; safe volume fraction {:.4}",
                a.subdomains, a.safe, a.unsafe_count, a.indeterminate, a.safe_fraction
            );
            if a.indeterminate > 0 {
                eprintln!("warning: {} subdomains could not be assessed", a.indeterminate);
            }
        }
        Cmd::McCheck { map, samples, seed, no_remainder, out } => {
            let m = read_map(&map)?;
            let report = pipeline::mc_check(&m, samples, seed, !no_remainder)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            match out {
                Some(p) => write(&p, &text)?,
                None => println!("{text}"),
            }
            eprintln!(
                "{} samples over {} subdomains: {} violations ({} missed events)",
                report.total_samples, report.subdomains_checked, report.violations, report.missed_events
            );
        }
        Cmd::PlotData { map, out } => {
            let m = read_map(&map)?;
            let f = File::create(&out).map_err(|e| Failure::Internal(format!("cannot write {}: {e}", out.display())))?;
            let rows = pipeline::plot_data(&m, BufWriter::new(f))?;
            eprintln!("{rows} rows written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}
