use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Run parameters as read from a `--config` JSON file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rule: Option<String>,
    pub k: Option<Vec<String>>,
    pub module_kmax: Option<f64>,
    pub coeff_bound: Option<u32>,
    pub n_max: Option<u32>,
    pub prec_bits: Option<u32>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub no_timestamp: Option<bool>,
    pub grid: Option<u32>,
    pub n_scan: Option<u32>,
    pub eps: Option<f64>,
    pub tail_start: Option<u32>,
    pub digits: Option<usize>,
}

/// Flags shared by all commands. Any flag given overrides the config file.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// JSON file with any of the options below (snake_case keys)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rule: "w=<word>" or "m=<int>;probs=<p0,...,pm>"
    #[arg(long)]
    pub rule: Option<String>,
    /// Wave number (repeatable): rationals, theta, sqrtN, pi, e; prefix "real:" to force a real literal
    #[arg(long, allow_hyphen_values = true)]
    pub k: Vec<String>,
    /// Upper end of the Fourier-module sweep
    #[arg(long)]
    pub module_kmax: Option<f64>,
    /// Coefficient bound |c|, |d| of the module sweep
    #[arg(long)]
    pub coeff_bound: Option<u32>,
    /// Level, orbit length or recursion depth, depending on the command
    #[arg(long)]
    pub n_max: Option<u32>,
    #[arg(long)]
    pub prec_bits: Option<u32>,
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Omit the generation-time line for byte-identical reruns
    #[arg(long)]
    pub no_timestamp: bool,
    /// δ grid size for recurrence witnesses
    #[arg(long)]
    pub grid: Option<u32>,
    /// Orbit scan length behind a decay certificate
    #[arg(long)]
    pub n_scan: Option<u32>,
    /// Cluster resolution for orbits
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tail_start: Option<u32>,
    /// Significant digits of high-precision columns
    #[arg(long)]
    pub digits: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Flags win over file values.
    pub fn merged(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let cfg = RunConfig {
            rule: flags.rule.clone().or(file.rule),
            k: if flags.k.is_empty() { file.k } else { Some(flags.k.clone()) },
            module_kmax: flags.module_kmax.or(file.module_kmax),
            coeff_bound: flags.coeff_bound.or(file.coeff_bound),
            n_max: flags.n_max.or(file.n_max),
            prec_bits: flags.prec_bits.or(file.prec_bits),
            samples: flags.samples.or(file.samples),
            seed: flags.seed.or(file.seed),
            out: flags.out.clone().or(file.out),
            format: flags.format.or(file.format),
            no_timestamp: Some(flags.no_timestamp || file.no_timestamp.unwrap_or(false)),
            grid: flags.grid.or(file.grid),
            n_scan: flags.n_scan.or(file.n_scan),
            eps: flags.eps.or(file.eps),
            tail_start: flags.tail_start.or(file.tail_start),
            digits: flags.digits.or(file.digits),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if let Some(b) = self.prec_bits {
            if b < 64 {
                return bad(format!("prec_bits must be at least 64, got {b}"));
            }
        }
        if self.samples == Some(0) {
            return bad("samples must be at least 1".into());
        }
        if self.digits == Some(0) {
            return bad("digits must be at least 1".into());
        }
        if self.coeff_bound == Some(0) {
            return bad("coeff_bound must be at least 1".into());
        }
        if let Some(k) = self.module_kmax {
            if k.is_nan() || k < 0.0 {
                return bad(format!("module_kmax must be non-negative, got {k}"));
            }
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e < 0.25) {
                return bad(format!("eps must lie in (0, 1/4), got {e}"));
            }
        }
        if let Some(g) = self.grid {
            if g < 2 {
                return bad(format!("grid must be at least 2, got {g}"));
            }
        }
        Ok(())
    }

    pub fn timestamp(&self) -> bool {
        !self.no_timestamp.unwrap_or(false)
    }
}
