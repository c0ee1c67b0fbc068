//! `ttsl`: run tensor-train or full-grid Vlasov–Poisson simulations and
//! compare their outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use ttsl_core::simulation::compare::{compare_files, Comparison};
use ttsl_core::simulation::{run, write_outputs, FinalState, SimulationConfig};
use ttsl_core::Error;

#[derive(Parser)]
#[command(name = "ttsl", version, about = "Semi-Lagrangian Vlasov–Poisson solver in tensor-train format")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a TOML configuration file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir` from the configuration.
        #[arg(long, env = "TTSL_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Compare two diagnostics (or electric-field) files on a common time axis.
    Compare { a: PathBuf, b: PathBuf },
}

/// Record of a completed run, written next to its outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub files: Vec<String>,
    pub final_ranks: Vec<usize>,
    pub peak_stored_doubles: usize,
    pub config: SimulationConfig,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Parse(_)) => 2,
        Some(Error::Config(_)) => 3,
        _ => 1,
    }
}

fn run_command(config: &Path, output_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", config.display())))?;
    let cfg = SimulationConfig::from_toml(&text)?;
    let dir = output_dir.unwrap_or_else(|| cfg.output.dir.clone());
    log::info!("{}: {:?} solver, {} steps, output in {}", cfg.run.name, cfg.run.solver, cfg.steps(), dir.display());
    let started = unix_now();
    let clock = Instant::now();
    let out = run(&cfg)?;
    let wall = clock.elapsed().as_secs_f64();
    let files = write_outputs(&cfg, &out, &dir).with_context(|| format!("writing outputs to {}", dir.display()))?;
    let final_ranks = match &out.final_state {
        FinalState::Tt(t) => t.ranks(),
        FinalState::Dense(_) => Vec::new(),
    };
    let manifest_path = dir.join("manifest.toml");
    let mut listed: Vec<String> = files.all().iter().map(|p| p.display().to_string()).collect();
    listed.push(manifest_path.display().to_string());
    let manifest = RunManifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        wall_seconds: wall,
        files: listed,
        final_ranks,
        peak_stored_doubles: out.peak_stored,
        config: cfg,
    };
    std::fs::write(&manifest_path, toml::to_string(&manifest)?)?;
    if let Some(last) = out.records.last() {
        println!(
            "t = {}: mass {:.12e}, electric energy {:.6e}, ranks {:?}, {:.1} s",
            last.time,
            last.mass,
            last.electric_energy_total(),
            last.ranks,
            wall
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn compare_command(a: &Path, b: &Path) -> anyhow::Result<()> {
    match compare_files(a, b)? {
        Comparison::Table(cols) => {
            println!("{:<20} {:>14} {:>14}", "column", "linf", "l2");
            for c in &cols {
                println!("{:<20} {:>14.6e} {:>14.6e}", c.name, c.linf, c.l2);
            }
            let energies: Vec<_> = cols.iter().filter(|c| c.name.starts_with("electric_energy")).collect();
            if !energies.is_empty() {
                let worst = energies.iter().fold(0.0f64, |m, c| m.max(c.linf));
                println!("electric energy linf: {worst:.6e}");
            }
        }
        Comparison::Field { linf, per_component } => {
            for (k, d) in per_component.iter().enumerate() {
                println!("E_{}: linf {d:.6e}", k + 1);
            }
            println!("electric field linf: {linf:.6e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output_dir } => run_command(&config, output_dir),
        Command::Compare { a, b } => compare_command(&a, &b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
