//! `pisotdiff`: experiments on diffraction of binary Pisot substitution
//! tilings.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric or
//! precision failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "pisotdiff", version, about = "Diffraction of binary Pisot substitution tilings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Substitution matrix, inflation factor, PV check and recurrence table
    Inspect(Flags),
    /// Geometric realization of a level-n word
    Patch(Flags),
    /// Intensities at a list of wave numbers or over the Fourier module
    Spectrum(Flags),
    /// Amplitude series A_n(k) from the block recursion
    Amplitude(Flags),
    /// Decay profile and c/n certificate for k outside the field
    Decay(Flags),
    /// Fractional parts of ξθ^n, gaps, clusters and recurrence witnesses
    Orbit(Flags),
    /// Intensity statistics of random noble means realizations
    Rnms(Flags),
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<pisot_diffraction::Error> for CliError {
    fn from(e: pisot_diffraction::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, flags) = match &cli.command {
        Command::Inspect(f) => ("inspect", f),
        Command::Patch(f) => ("patch", f),
        Command::Spectrum(f) => ("spectrum", f),
        Command::Amplitude(f) => ("amplitude", f),
        Command::Decay(f) => ("decay", f),
        Command::Orbit(f) => ("orbit", f),
        Command::Rnms(f) => ("rnms", f),
    };
    let cfg = RunConfig::merged(flags)?;
    match cli.command {
        Command::Inspect(_) => commands::inspect(&cfg),
        Command::Patch(_) => commands::patch(&cfg),
        Command::Spectrum(_) => commands::spectrum(&cfg),
        Command::Amplitude(_) => commands::amplitude(&cfg),
        Command::Decay(_) => commands::decay(&cfg),
        Command::Orbit(_) => commands::orbit(&cfg),
        Command::Rnms(_) => commands::rnms(&cfg),
    }
    .map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{name}: {m}")),
        CliError::Numeric(m) => CliError::Numeric(format!("{name}: {m}")),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
