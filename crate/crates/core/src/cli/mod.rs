//! Command-line driver: `qsu2 <validate|haar|commutators|heat|modular|all>`.
//!
//! Each experiment writes one CSV (or JSON) table, every row carrying the
//! provenance tuple, and prints one PASS/FAIL line per criterion. The exit
//! status is 0 when everything passes, 1 on any FAIL, 2 on a configuration
//! error.

pub mod config;
pub mod experiments;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{ConfigArgs, Experiment, Format, RunConfig, TGrid, PRECISION_ENV};
pub use output::{Cell, Criterion, Report, Table};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "qsu2", version, about = "Spectral geometry experiments on the quantum group SU_q(2)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: ConfigArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Relation battery, Haar two-path check, v-basis, Dirac relation, b-coefficients.
    Validate,
    /// Haar state from heat-trace ratios and from a second trace multiplier.
    Haar,
    /// `[|D|, a]` shell-norm plateau and `[D, a]` witness growth.
    Commutators,
    /// Weighted heat trace, its series forms, and the small-t band.
    Heat,
    /// `psi(ab) = psi(b Psi(a))` sweep and generator scaling.
    Modular,
    /// Every experiment; `--out` names a directory.
    All,
}

impl Command {
    fn experiment(self) -> Option<Experiment> {
        match self {
            Command::Validate => Some(Experiment::Validate),
            Command::Haar => Some(Experiment::Haar),
            Command::Commutators => Some(Experiment::Commutators),
            Command::Heat => Some(Experiment::Heat),
            Command::Modular => Some(Experiment::Modular),
            Command::All => None,
        }
    }
}

pub const DEFAULT_ALL_DIR: &str = "qsu2-results";

/// Resolved configurations, one per experiment to run.
pub fn plan(cli: &Cli, env_precision: Option<&str>) -> Result<Vec<RunConfig>> {
    let mut args = cli.args.clone();
    if let Some(path) = args.config.clone() {
        args.merge_file(&path)?;
    }
    match cli.command.experiment() {
        Some(exp) => Ok(vec![RunConfig::resolve(exp, &args, env_precision)?]),
        None => {
            let dir = args.out.take().unwrap_or_else(|| PathBuf::from(DEFAULT_ALL_DIR));
            Experiment::ALL
                .into_iter()
                .map(|exp| {
                    let mut cfg = RunConfig::resolve(exp, &args, env_precision)?;
                    cfg.out = dir.join(format!("{}.{}", exp.name(), cfg.format.extension()));
                    Ok(cfg)
                })
                .collect()
        }
    }
}

/// Run the planned experiments, write their tables, and print the summary.
/// Returns whether every criterion passed.
pub fn execute(configs: &[RunConfig], out: &mut dyn Write) -> Result<bool> {
    let mut all_pass = true;
    for cfg in configs {
        let report = experiments::run(cfg);
        report.table.write(cfg, &cfg.out)?;
        writeln!(
            out,
            "== {} q={} lmax_doubled={} precision_bits={} seed={} -> {}",
            cfg.experiment,
            cfg.q,
            cfg.lmax_doubled,
            cfg.precision_bits,
            cfg.seed,
            display_path(&cfg.out)
        )?;
        for c in &report.criteria {
            writeln!(out, "{c}")?;
        }
        all_pass &= report.passed();
    }
    writeln!(out, "{}", if all_pass { "PASS overall" } else { "FAIL overall" })?;
    Ok(all_pass)
}

fn display_path(p: &Path) -> String {
    p.display().to_string()
}

/// Entry point shared by the binary: parse, run, map to an exit code.
pub fn main_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let env = std::env::var(PRECISION_ENV).ok();
    let configs = match plan(&cli, env.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qsu2: {e}");
            return ExitCode::from(2);
        }
    };
    let stdout = std::io::stdout();
    match execute(&configs, &mut stdout.lock()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qsu2: {e}");
            ExitCode::from(2)
        }
    }
}
