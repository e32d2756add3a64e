//! Experiment configuration: JSON files overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Simulate,
    Signchanges,
    PrimeSums,
    SupScan,
    Chaining,
    Concentration,
    Sequences,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Simulate => "simulate",
            Self::Signchanges => "signchanges",
            Self::PrimeSums => "prime-sums",
            Self::SupScan => "sup-scan",
            Self::Chaining => "chaining",
            Self::Concentration => "concentration",
            Self::Sequences => "sequences",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Certified constants, the log-weighted bound grid, prime zeta ratios, Chebyshev.
    Constants,
    /// Partial summation residuals over seeds.
    Identities,
    All,
}

/// Every tunable field, all optional. Used for both config files and flags;
/// flag names are the kebab-case forms of the field names.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    /// Base seed; seed sweeps use `seed, seed + 1, ...`.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Directory receiving results and manifests.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_seeds: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime_limit: Option<u64>,
    /// Comma-separated sigma grid.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    /// Comma-separated arguments for the prime zeta ratio check.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_x: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler_primes: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corollary_c: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Comma-separated ell values.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ells: Option<Vec<u64>>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtraction_ell_max: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<u32>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    /// Upper end of the t grid; defaults to 2 log^2(1/(sigma - 1/2)).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Params { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Params {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: Params) -> Params {
        let base = self;
        overlay_fields!(base, top; command, suite, seed, output_dir, num_seeds, x_max, prime_limit, sigma,
            zeta_x, euler_primes, c, a0, a1, k_max, corollary_c, epsilon, gamma, ells, subtraction_ell_max,
            trials, r_max, grid_step, t_max, c0, c1, c2)
    }
}

/// Fully resolved configuration. Serializes to a [`Params`]-compatible file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub num_seeds: u64,
    pub x_max: u64,
    pub prime_limit: u64,
    pub sigma: Vec<f64>,
    pub zeta_x: Vec<f64>,
    pub euler_primes: u64,
    pub c: f64,
    pub a0: f64,
    pub a1: f64,
    pub k_max: u64,
    pub corollary_c: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub ells: Vec<u64>,
    pub subtraction_ell_max: u64,
    pub trials: u64,
    pub r_max: u32,
    pub grid_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

fn default_sigma(command: Command) -> Vec<f64> {
    match command {
        Command::Verify | Command::PrimeSums => (51..=100).map(|i| i as f64 / 100.0).collect(),
        Command::SupScan => vec![0.6, 0.7],
        Command::Concentration => vec![0.5, 0.6, 0.75, 1.0, 2.0],
        _ => vec![0.6, 1.5],
    }
}

fn default_ells(command: Command) -> Vec<u64> {
    match command {
        Command::Chaining => vec![3, 4, 5],
        Command::Sequences => (1..=16).collect(),
        _ => (1..=8).collect(),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn resolve(command: Command, p: Params) -> Result<Self, CliError> {
        if let Some(c) = p.command {
            if c != command {
                return Err(invalid(format!(
                    "config file is for `{}`, not `{}`",
                    c.name(),
                    command.name()
                )));
            }
        }
        let x_max = p.x_max.unwrap_or(1_000_000);
        let prime_limit = p.prime_limit.unwrap_or(match command {
            Command::Simulate | Command::Signchanges => x_max,
            Command::Verify | Command::PrimeSums => 10_000_000,
            Command::Chaining => 1_000_000,
            _ => 100_000,
        });
        let cfg = Self {
            command,
            suite: match command {
                Command::Verify => Some(p.suite.unwrap_or(Suite::All)),
                _ => None,
            },
            seed: p.seed.unwrap_or(0),
            output_dir: p.output_dir.unwrap_or_else(|| PathBuf::from("rmflab-out")),
            num_seeds: p.num_seeds.unwrap_or(match command {
                Command::Signchanges => 100,
                Command::Chaining | Command::Verify => 20,
                Command::SupScan => 4,
                _ => 1,
            }),
            x_max,
            prime_limit,
            sigma: p.sigma.unwrap_or_else(|| default_sigma(command)),
            zeta_x: p.zeta_x.unwrap_or_else(|| vec![1.5, 1.1, 1.01, 1.001]),
            euler_primes: p.euler_primes.unwrap_or(9_000_000),
            c: p.c.unwrap_or(3.0),
            a0: p.a0.unwrap_or(0.1),
            a1: p.a1.unwrap_or(1.1),
            k_max: p.k_max.unwrap_or(20),
            corollary_c: p.corollary_c.unwrap_or(0.0),
            epsilon: p.epsilon.unwrap_or(1.0),
            gamma: p.gamma.unwrap_or(1.0),
            ells: p.ells.unwrap_or_else(|| default_ells(command)),
            subtraction_ell_max: p.subtraction_ell_max.unwrap_or(100_000),
            trials: p.trials.unwrap_or(10_000),
            r_max: p.r_max.unwrap_or(12),
            grid_step: p.grid_step.unwrap_or(0.01),
            t_max: p.t_max,
            c0: p.c0.unwrap_or(0.25),
            c1: p.c1.unwrap_or(1.5),
            c2: p.c2.unwrap_or(-1.5),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir must not be empty"));
        }
        if self.num_seeds == 0 {
            return Err(invalid("num_seeds must be >= 1"));
        }
        if self.x_max == 0 {
            return Err(invalid("x_max must be >= 1"));
        }
        if self.sigma.is_empty() || self.sigma.iter().any(|s| !s.is_finite()) {
            return Err(invalid("sigma grid must be non-empty and finite"));
        }
        if self.ells.is_empty() {
            return Err(invalid("ells must be non-empty"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 2.0) {
            return Err(invalid(format!("epsilon must lie in (0, 2), got {}", self.epsilon)));
        }
        if !(self.grid_step > 0.0) {
            return Err(invalid("grid_step must be positive"));
        }
        Ok(())
    }

    /// Hash of everything except `output_dir`, which does not affect results.
    pub fn hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&keyed).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    #[cfg(test)]
    pub fn to_params(&self) -> Params {
        let text = serde_json::to_string(self).expect("config serializes");
        serde_json::from_str(&text).expect("resolved config is a valid params file")
    }
}
