//! Command-line front end: `run` a configured simulation, `report` on a run
//! directory, `verify` the numerical kernels.
//!
//! Exit codes: 0 success, 1 failed verification, 2 configuration error,
//! 3 solver abort, 4 I/O error.

use angio_core::config::{parse_config, RunConfig};
use angio_core::driver::{report, run, verify, RunError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "angio", version, about = "Finite-volume solver for a reduced angiogenesis model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots, manifest and diagnostics
    Run {
        /// Plain-text key=value configuration file (defaults reproduce the
        /// reference scenario)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config's out_dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra KEY=VALUE assignments applied after the file, repeatable
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads (0 = all cores; results are thread-count
        /// independent)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summarize a finished run directory
    Report {
        /// Run directory containing manifest.txt
        dir: PathBuf,
    },
    /// Run the numerical self-checks and print one PASS/FAIL line each
    Verify,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

fn load_config(
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    overrides: &[String],
    threads: Option<usize>,
) -> Result<RunConfig, u8> {
    let mut text = String::new();
    if let Some(path) = &config {
        match std::fs::read_to_string(path) {
            Ok(t) => text = t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return Err(EXIT_IO);
            }
        }
    }
    for ov in overrides {
        text.push('\n');
        text.push_str(ov);
    }
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return Err(EXIT_CONFIG);
        }
    };
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(threads) = threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn exit_code_for(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Model(_) | RunError::Grid(_) => EXIT_CONFIG,
        _ => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, overrides, threads } => {
            let cfg = match load_config(config, out, &overrides, threads) {
                Ok(c) => c,
                Err(code) => return ExitCode::from(code),
            };
            match run(&cfg) {
                Ok(rep) => {
                    println!(
                        "wrote {} snapshots to {} (dt = {:.6e}, {} steps, {:.1} s)",
                        rep.snapshots.len(),
                        rep.out_dir.display(),
                        rep.dt,
                        rep.completed_steps,
                        rep.wall_seconds
                    );
                    if let Some(a) = &rep.abort {
                        eprintln!("solver aborted at step {}: {}", a.step, a.reason);
                        return ExitCode::from(EXIT_SOLVER);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        Command::Report { dir } => match report(&dir) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code_for(&e))
            }
        },
        Command::Verify => {
            let checks = verify();
            let mut all_ok = true;
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] {} — {}", c.name, c.detail);
                all_ok &= c.passed;
            }
            if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
