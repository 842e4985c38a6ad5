//! Run configuration: command-line flags, an optional `key=value` file, and
//! the `QSU2_PRECISION_BITS` environment override.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qarith::{DeformationParameter, DOUBLE_PRECISION_BITS};
use crate::spectral::{self, DEFAULT_SEED};

pub const PRECISION_ENV: &str = "QSU2_PRECISION_BITS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Validate,
    Haar,
    Commutators,
    Heat,
    Modular,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Validate,
        Experiment::Haar,
        Experiment::Commutators,
        Experiment::Heat,
        Experiment::Modular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Haar => "haar",
            Experiment::Commutators => "commutators",
            Experiment::Heat => "heat",
            Experiment::Modular => "modular",
        }
    }

    /// Doubled truncation used when none is given.
    pub fn default_lmax_doubled(self) -> i64 {
        match self {
            Experiment::Validate => 24,
            Experiment::Haar => 32,
            Experiment::Commutators => 62,
            Experiment::Heat => 62,
            Experiment::Modular => 12,
        }
    }

    pub fn default_t_grid(self) -> TGrid {
        match self {
            Experiment::Heat => TGrid {
                start: 0.05,
                stop: 0.5,
                count: 12,
                log: true,
            },
            _ => TGrid {
                start: 0.5,
                stop: 2.0,
                count: 3,
                log: true,
            },
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// `start:stop:count[:log|lin]`, log-spaced unless `lin` is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl TGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.log {
            return spectral::log_grid(self.start, self.stop, self.count);
        }
        if !(self.start > 0.0 && self.stop >= self.start) || self.count == 0 {
            return Err(Error::InvalidParameter(format!(
                "t grid needs 0 < start <= stop and count >= 1 (got {self})"
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|k| if k == self.count - 1 { self.stop } else { self.start + step * k as f64 })
            .collect())
    }
}

impl fmt::Display for TGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.log { "log" } else { "lin" };
        write!(f, "{}:{}:{}:{kind}", self.start, self.stop, self.count)
    }
}

impl FromStr for TGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected start:stop:count[:log|lin], got `{s}`"));
        }
        let num = |p: &str, what: &str| -> std::result::Result<f64, String> {
            p.trim().parse::<f64>().map_err(|e| format!("bad {what} `{p}`: {e}"))
        };
        let start = num(parts[0], "start")?;
        let stop = num(parts[1], "stop")?;
        let count = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("bad count `{}`: {e}", parts[2]))?;
        let log = match parts.get(3).map(|p| p.trim()) {
            None | Some("log") => true,
            Some("lin") => false,
            Some(other) => return Err(format!("bad spacing `{other}` (expected log or lin)")),
        };
        if !(start > 0.0) || !(stop >= start) || count == 0 {
            return Err(format!("need 0 < start <= stop and count >= 1, got `{s}`"));
        }
        Ok(TGrid { start, stop, count, log })
    }
}

/// Flags shared by every subcommand; unset flags fall back to the config file,
/// then to per-experiment defaults.
#[derive(Clone, Debug, Default, Args)]
pub struct ConfigArgs {
    /// Deformation parameter (q > 0, q != 1).
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Truncation spin as a doubled integer (24 means Lmax = 12).
    #[arg(long, global = true)]
    pub lmax: Option<i64>,
    /// Heat-time grid `start:stop:count[:log|lin]`.
    #[arg(long = "t-grid", global = true)]
    pub t_grid: Option<TGrid>,
    /// Relative tolerance for iterative norms and trace tails.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Seed for power-iteration start vectors.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Floating-point precision in bits (only 53 is supported).
    #[arg(long = "precision-bits", global = true)]
    pub precision_bits: Option<u32>,
    /// Output file; a directory for `all`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Flat `key=value` file using the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl ConfigArgs {
    /// Fill fields that are unset here from a `key=value` text.
    pub fn merge_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                field: format!("line {}", lineno + 1),
                message: format!("expected key=value, got `{line}`"),
            })?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            let bad = |m: String| Error::Config {
                field: key.clone(),
                message: m,
            };
            match key.as_str() {
                "q" => {
                    let v = value.parse().map_err(|e| bad(format!("{e}")))?;
                    self.q.get_or_insert(v);
                }
                "lmax" => {
                    let v = value.parse().map_err(|e| bad(format!("{e}")))?;
                    self.lmax.get_or_insert(v);
                }
                "t-grid" => {
                    let v = value.parse().map_err(bad)?;
                    self.t_grid.get_or_insert(v);
                }
                "tolerance" => {
                    let v = value.parse().map_err(|e| bad(format!("{e}")))?;
                    self.tolerance.get_or_insert(v);
                }
                "seed" => {
                    let v = value.parse().map_err(|e| bad(format!("{e}")))?;
                    self.seed.get_or_insert(v);
                }
                "precision-bits" => {
                    let v = value.parse().map_err(|e| bad(format!("{e}")))?;
                    self.precision_bits.get_or_insert(v);
                }
                "out" => {
                    self.out.get_or_insert_with(|| PathBuf::from(value));
                }
                "format" => {
                    let v = value.parse().map_err(bad)?;
                    self.format.get_or_insert(v);
                }
                _ => return Err(bad("unknown key".into())),
            }
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            field: "config".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        self.merge_file_text(&text)
    }
}

/// A validated configuration for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub q: f64,
    pub lmax_doubled: i64,
    pub t_grid: TGrid,
    pub tolerance: f64,
    pub seed: u64,
    pub precision_bits: u32,
    pub out: PathBuf,
    pub format: Format,
}

pub const DEFAULT_Q: f64 = 1.2;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

impl RunConfig {
    /// Resolve flags (already merged with any config file) for `experiment`.
    ///
    /// Precedence: flags, then the config file, then `QSU2_PRECISION_BITS`
    /// for the precision, then defaults.
    pub fn resolve(experiment: Experiment, args: &ConfigArgs, env_precision: Option<&str>) -> Result<Self> {
        let precision_bits = match (args.precision_bits, env_precision) {
            (Some(p), _) => p,
            (None, Some(text)) => text.trim().parse().map_err(|e| Error::Config {
                field: PRECISION_ENV.into(),
                message: format!("`{text}`: {e}"),
            })?,
            (None, None) => DOUBLE_PRECISION_BITS,
        };
        let format = args.format.unwrap_or_default();
        let cfg = RunConfig {
            experiment,
            q: args.q.unwrap_or(DEFAULT_Q),
            lmax_doubled: args.lmax.unwrap_or_else(|| experiment.default_lmax_doubled()),
            t_grid: args.t_grid.unwrap_or_else(|| experiment.default_t_grid()),
            tolerance: args.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            seed: args.seed.unwrap_or(DEFAULT_SEED),
            precision_bits,
            out: args
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}.{}", experiment.name(), format.extension()))),
            format,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: String| Error::Config {
            field: f.into(),
            message: m,
        };
        if !(self.q > 0.0) || self.q == 1.0 || !self.q.is_finite() {
            return Err(field("q", format!("need q > 0 and q != 1 (got {})", self.q)));
        }
        if self.lmax_doubled < 0 {
            return Err(field("lmax", format!("must be >= 0 (got {})", self.lmax_doubled)));
        }
        if !(self.tolerance > 0.0) {
            return Err(field("tolerance", format!("must be > 0 (got {})", self.tolerance)));
        }
        self.t_grid.points().map_err(|e| field("t-grid", e.to_string()))?;
        self.deformation()?;
        Ok(())
    }

    pub fn deformation(&self) -> Result<DeformationParameter> {
        DeformationParameter::with_precision(self.q, self.precision_bits).map_err(|e| Error::Config {
            field: "precision-bits".into(),
            message: e.to_string(),
        })
    }
}
