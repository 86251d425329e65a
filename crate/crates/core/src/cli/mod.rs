//! Command-line front end.

pub mod check;
pub mod config;
pub mod preset;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::observables::{simulate, write_csv_file, PlotStyle};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "NHQC_SEED";

#[derive(Debug, Parser)]
#[command(name = "nhqc", version, about = "Non-Hermitian quantum-classical dynamics of a two-spin chain in a harmonic bath")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration file and write its time series.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a figure sweep and emit a gnuplot script.
    Preset {
        #[arg(value_parser = ["fig1", "fig2", "fig3", "fig4"])]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ensemble size per curve (default 50000).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the acceptance checks.
    Check {
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(0) => Err(Error::Config("--threads must be >= 1".into())),
        Some(n) => check::with_threads(n, f)?,
        None => f(),
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Config(format!("{SEED_ENV}: invalid seed '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Executes a parsed command; the returned code is the process exit status.
pub fn execute<W: Write + Send>(cli: Cli, out: &mut W) -> Result<i32> {
    match cli.command {
        Command::Run { config, out: dir, threads } => {
            let mut cfg = config::parse_config_file(&config)?;
            if let Some(seed) = seed_override()? {
                cfg.sim.seed = seed;
            }
            let start = Instant::now();
            let (series, summary) = in_pool(threads, || simulate(&cfg.model, &cfg.decay, &cfg.sim))?;
            let elapsed = start.elapsed();
            std::fs::create_dir_all(&dir)?;
            let stem = config.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            let path = dir.join(format!("{stem}.csv"));
            write_csv_file(&series, &path)?;
            let final_trace = series.rows.last().map_or(f64::NAN, |(_, r)| r.trace().re);
            writeln!(out, "run_id       {}", series.metadata.run_id())?;
            writeln!(out, "output       {}", path.display())?;
            writeln!(out, "final trace  {final_trace:.12e}")?;
            writeln!(out, "wall time    {:.2} s", elapsed.as_secs_f64())?;
            writeln!(out, "members      {} ({} samples)", summary.n_members, summary.n_samples)?;
            writeln!(out, "excluded     {} (weight {:.3e})", summary.excluded, summary.excluded_weight)?;
            if cfg.sim.mode == crate::model::Mode::Nonadiabatic {
                writeln!(out, "hops         {}", summary.hops)?;
            }
            for reason in summary.reasons.iter().take(5) {
                writeln!(out, "  excluded: {reason}")?;
            }
            match series.check_invariants() {
                Ok(()) => Ok(0),
                Err(e) => {
                    writeln!(out, "invariant violated: {e}")?;
                    Ok(1)
                }
            }
        }
        Command::Preset { name, out: dir, seed, samples, threads } => {
            let style: PlotStyle = name.parse()?;
            let result = in_pool(threads, || preset::run_preset(style, seed, samples, &dir))?;
            for (path, (label, series, _)) in result.csv.iter().zip(&result.runs) {
                let final_trace = series.rows.last().map_or(f64::NAN, |(_, r)| r.trace().re);
                writeln!(out, "{label:<14} final trace {final_trace:.6e}  {}", path.display())?;
            }
            writeln!(out, "plot script {}", result.script.display())?;
            Ok(0)
        }
        Command::Check { threads } => {
            let outcomes = in_pool(threads, || check::run_all(&check::Scale::full(), out))?;
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            writeln!(out, "{} of {} criteria passed", outcomes.len() - failed, outcomes.len())?;
            Ok(i32::from(failed > 0))
        }
    }
}
