//! Command-line driver: forge instances, verify them, and measure how well
//! samples separate the two sides.
//!
//! Exit codes: 0 when every check passes, 1 when a property check fails, 2
//! for usage, I/O, parse and infeasible-parameter errors.

pub mod commands;
pub mod descriptor;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::{
    BoundSummary, CheckResult, ForgeSummary, SampleFile, TvRow, VerifyMode, VerifyOptions, VerifyReport, bound,
    forge, sample, tv_rows, verify,
};
pub use descriptor::{InstanceDescriptor, Real, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] lbforge_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Parser)]
#[command(name = "lbforge", version, about = "Forge and check moment-matched hard instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Yes,
    No,
}

impl From<SideArg> for lbforge_core::Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Yes => lbforge_core::Side::Yes,
            SideArg::No => lbforge_core::Side::No,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an instance and write its descriptor.
    Forge {
        #[arg(long)]
        family: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long = "const-c", default_value_t = lbforge_core::instances::DEFAULT_C)]
        const_c: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a descriptor: validity, moment matching, yes-side membership,
    /// no-side farness.
    Verify {
        descriptor: PathBuf,
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = VerifyMode::Auto)]
        mode: VerifyMode,
        /// `threshold=<fraction>`, `budget=<atoms>`, `lp-limit=<bins>`.
        #[arg(long = "knob", value_parser = parse_knob)]
        knobs: Vec<(String, f64)>,
    },
    /// Emit a CSV of TV bounds and estimates against sample count.
    Tv {
        descriptor: PathBuf,
        /// Comma-separated sample counts.
        #[arg(long, value_delimiter = ',', required = true)]
        samples: Vec<u64>,
        #[arg(long, default_value_t = lbforge_core::indist::DEFAULT_TRIALS)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Constant in the `m >= C ln s` hypothesis check.
        #[arg(long = "const-c", default_value_t = lbforge_core::instances::DEFAULT_C)]
        const_c: f64,
        /// `c1`..`c4` for the sample bound.
        #[arg(long = "knob", value_parser = parse_knob)]
        knobs: Vec<(String, f64)>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the sample-complexity lower bound and the branch of its minimum.
    Bound {
        #[arg(long)]
        family: String,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: u32,
        /// `k1`, `k2`, `k3`.
        #[arg(long = "knob", value_parser = parse_knob)]
        knobs: Vec<(String, f64)>,
    },
    /// Draw one distribution and a sample of counts from it.
    Sample {
        descriptor: PathBuf,
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn parse_knob(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("knob '{s}' is not k=v"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("knob '{s}': {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn write_out(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs one command, writing reports to stdout and stderr; returns the exit
/// code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Forge {
            family,
            epsilon,
            n,
            d,
            const_c,
            seed,
            out,
        } => {
            let summary = forge(&family, epsilon, n, d, const_c, seed)?;
            write_out(&out, &summary.descriptor.to_json())?;
            println!("{}", summary.describe());
            Ok(0)
        }
        Command::Verify {
            descriptor,
            draws,
            seed,
            mode,
            knobs,
        } => {
            let desc = InstanceDescriptor::load(&descriptor)?;
            let mut opts = VerifyOptions {
                draws,
                seed,
                mode,
                ..VerifyOptions::default()
            };
            opts.apply_knobs(&knobs)?;
            let report = verify(&desc, &opts)?;
            for line in report.json_lines() {
                println!("{line}");
            }
            eprintln!("{}", report.summary());
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Tv {
            descriptor,
            samples,
            trials,
            seed,
            const_c,
            knobs,
            out,
        } => {
            let desc = InstanceDescriptor::load(&descriptor)?;
            let rows = tv_rows(&desc, &samples, trials, seed, const_c, &knobs)?;
            let csv = commands::rows_to_csv(&rows)?;
            match out {
                Some(path) => write_out(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Bound {
            family,
            epsilon,
            n,
            d,
            knobs,
        } => {
            let summary = bound(&family, epsilon, n, d, &knobs)?;
            println!("{}", summary.describe());
            Ok(0)
        }
        Command::Sample {
            descriptor,
            side,
            samples,
            seed,
            out,
        } => {
            let desc = InstanceDescriptor::load(&descriptor)?;
            let file = sample(&desc, side.into(), samples, seed)?;
            write_out(&out, &file.to_json())?;
            Ok(0)
        }
    }
}
