//! Command-line experiment runner for `spde-lab`.
//!
//! Each subcommand writes one CSV (to `--out`, the config's `output`, or
//! stdout) and prints one `PASS`/`FAIL` line per check. Exit codes: 0 when
//! every check passes, 2 when one fails, 1 on usage or config errors.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod table;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::ExperimentConfig;

pub const WORKERS_ENV: &str = "SPDE_LAB_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "spde-lab", version, about = "Degenerate stochastic evolution experiments")]
pub struct Cli {
    /// Worker threads (default: SPDE_LAB_WORKERS, then logical cores).
    /// Output does not depend on this value.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// B-orthonormalize the standard basis under a random PSD form.
    Gram(GramArgs),
    /// Solve one path and write the states.
    Simulate(RunArgs),
    /// Itô ledger of one path plus the Monte Carlo expectation identity.
    ItoCheck(ItoArgs),
    /// Monte Carlo energy inequality.
    EnergyCheck(RunArgs),
    /// Quadratic variation of the noise term over nested dyadic levels.
    Qv(RunArgs),
    /// Itô isometry for the integrand `Z(t) = t`.
    Isometry(RunArgs),
    /// Ledger residual under step halving on a shared Wiener path.
    Convergence(RunArgs),
}

#[derive(Debug, Args)]
pub struct GramArgs {
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rank of `B = GGᵀ` (default: `dim`).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides both `solver.seed` and `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `n_paths` and `options.isometry_paths`.
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// Overrides `solver.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ItoArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Also write the per-checkpoint expectation report as CSV.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl RunArgs {
    pub fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.solver.seed = s;
            cfg.master_seed = s;
        }
        if let Some(n) = self.n_paths {
            cfg.n_paths = n;
            cfg.options.isometry_paths = n;
        }
        if let Some(dt) = self.dt {
            cfg.solver.dt = dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the CLI with the process streams.
pub fn run_cli(argv: Vec<String>) -> i32 {
    run_cli_with_io(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

pub fn run_cli_with_io(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(passed) => {
            if passed {
                0
            } else {
                2
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn worker_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.trim().parse().map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got `{v}`"))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        anyhow::bail!("worker count must be at least 1");
    }
    Ok(n)
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<bool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(cli.workers)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let (outcome, out, report_path) = pool.install(|| -> anyhow::Result<_> {
        Ok(match &cli.command {
            Command::Gram(a) => (commands::gram(a.dim, a.rank.unwrap_or(a.dim), a.seed)?, a.out.clone(), None),
            Command::Simulate(a) => run_with(a, commands::simulate)?,
            Command::EnergyCheck(a) => run_with(a, commands::energy_check)?,
            Command::Qv(a) => run_with(a, commands::qv)?,
            Command::Isometry(a) => run_with(a, commands::isometry)?,
            Command::Convergence(a) => run_with(a, commands::convergence)?,
            Command::ItoCheck(a) => {
                let (o, out, _) = run_with(&a.run, commands::ito_check)?;
                (o, out, a.report.clone())
            }
        })
    })?;
    emit(&outcome, out.as_deref(), report_path.as_deref(), stdout, stderr)
}

type Prepared = (Outcome, Option<PathBuf>, Option<PathBuf>);

fn run_with(args: &RunArgs, f: fn(&ExperimentConfig) -> anyhow::Result<Outcome>) -> anyhow::Result<Prepared> {
    let cfg = args.load()?;
    let out = args.out.clone().or_else(|| cfg.output.clone());
    Ok((f(&cfg)?, out, None))
}

/// Writes the CSV and the summary lines. Summaries go to stdout unless the
/// CSV does.
fn emit(
    outcome: &Outcome,
    out: Option<&Path>,
    report: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> anyhow::Result<bool> {
    if let Some(path) = report {
        match &outcome.report {
            Some(r) => r.save(path)?,
            None => anyhow::bail!("this command has no report table"),
        }
    }
    let summary: &mut dyn Write = match out {
        Some(path) => {
            outcome.table.save(path)?;
            stdout
        }
        None => {
            outcome.table.write_to(&mut *stdout)?;
            stderr
        }
    };
    for c in &outcome.checks {
        writeln!(summary, "{}", c.line())?;
    }
    Ok(outcome.passed())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_count_prefers_the_flag_then_the_environment() {
        // The only test touching this variable.
        std::env::set_var(WORKERS_ENV, "3");
        assert_eq!(worker_count(None).unwrap(), Some(3));
        assert_eq!(worker_count(Some(5)).unwrap(), Some(5));
        std::env::set_var(WORKERS_ENV, "many");
        assert!(worker_count(None).is_err());
        std::env::set_var(WORKERS_ENV, "0");
        assert!(worker_count(None).is_err());
        std::env::remove_var(WORKERS_ENV);
        assert_eq!(worker_count(None).unwrap(), None);
    }
}
