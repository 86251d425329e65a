//! Figure sweeps: fixed model parameters, one CSV per decay rate plus a gnuplot script.

use std::path::{Path, PathBuf};

use crate::cli::check::{IDENTITY_GAMMAS, PROJECTOR_GAMMAS};
use crate::cli::config::RunConfig;
use crate::error::Result;
use crate::model::{DecayLabel, InitialState};
use crate::observables::{emit_plot_script, simulate, write_csv_file, PlotStyle, TimeSeries};
use crate::propagator::RunSummary;

pub fn preset_runs(style: PlotStyle, seed: u64) -> Result<Vec<(String, RunConfig)>> {
    let (label, gammas, state, symbol): (_, &[f64], _, _) = match style {
        PlotStyle::Fig1 | PlotStyle::Fig2 => (DecayLabel::IdentityUniform, &IDENTITY_GAMMAS, InitialState::Phi, "gamma1"),
        PlotStyle::Fig3 | PlotStyle::Fig4 => (DecayLabel::ProjectorEE, &PROJECTOR_GAMMAS, InitialState::Psi, "gamma2"),
    };
    gammas
        .iter()
        .map(|&g| {
            let mut cfg = RunConfig::standard(label, g, state)?;
            cfg.sim.seed = seed;
            Ok((format!("{symbol}={g}"), cfg))
        })
        .collect()
}

pub struct PresetOutput {
    pub csv: Vec<PathBuf>,
    pub script: PathBuf,
    pub runs: Vec<(String, TimeSeries, RunSummary)>,
}

fn style_name(style: PlotStyle) -> &'static str {
    match style {
        PlotStyle::Fig1 => "fig1",
        PlotStyle::Fig2 => "fig2",
        PlotStyle::Fig3 => "fig3",
        PlotStyle::Fig4 => "fig4",
    }
}

/// Runs the sweep, writing `<name>_<k>.csv` and `<name>.gp` into `out`.
/// `samples` overrides the ensemble size.
pub fn run_preset(style: PlotStyle, seed: u64, samples: Option<usize>, out: &Path) -> Result<PresetOutput> {
    std::fs::create_dir_all(out)?;
    let name = style_name(style);
    let mut csv = Vec::new();
    let mut curves = Vec::new();
    let mut runs = Vec::new();
    for (k, (label, mut cfg)) in preset_runs(style, seed)?.into_iter().enumerate() {
        if let Some(n) = samples {
            cfg.sim.n_samples = n;
        }
        let (series, summary) = simulate(&cfg.model, &cfg.decay, &cfg.sim)?;
        series.check_invariants()?;
        let path = out.join(format!("{name}_{k}.csv"));
        write_csv_file(&series, &path)?;
        csv.push(path.clone());
        curves.push((PathBuf::from(path.file_name().unwrap_or_default()), label.clone()));
        runs.push((label, series, summary));
    }
    // The script refers to the CSVs relative to its own directory.
    let script_text = {
        let cwd_files: Vec<(PathBuf, String)> = curves.iter().map(|(p, l)| (out.join(p), l.clone())).collect();
        emit_plot_script(&cwd_files, style)?.replace(&format!("{}/", out.display()), "")
    };
    let script = out.join(format!("{name}.gp"));
    std::fs::write(&script, script_text)?;
    Ok(PresetOutput { csv, script, runs })
}
