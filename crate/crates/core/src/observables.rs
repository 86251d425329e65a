//! Reduced density matrix estimation and CSV / plot-script output.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, trace, CMat4, C64};
use crate::model::{DecaySpec, Mode, Model, SimConfig};
use crate::propagator::{run_ensemble, PairTrajectory, RunSummary};

/// Samples per parallel reduction block. Fixed so that the summation tree, and
/// hence every output bit, does not depend on the worker count.
const REDUCTION_BLOCK: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity {
    /// Sample mean in the subsystem basis.
    pub elements: CMat4,
    /// Standard error of the mean of each element, `sqrt((var re + var im) / n)`.
    pub stderr: [[f64; 4]; 4],
    pub trace_stderr: f64,
    pub n_samples: usize,
}

impl ReducedDensity {
    pub fn trace(&self) -> C64 {
        trace(&self.elements)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.elements)
    }
}

/// Welford accumulator over per-sample matrices (32 real parts plus the trace).
#[derive(Clone, Debug)]
pub struct DensityAccumulator {
    count: usize,
    mean: [f64; 33],
    m2: [f64; 33],
}

impl Default for DensityAccumulator {
    fn default() -> Self {
        Self { count: 0, mean: [0.0; 33], m2: [0.0; 33] }
    }
}

fn flatten(m: &CMat4) -> [f64; 33] {
    let mut out = [0.0; 33];
    for i in 0..4 {
        for j in 0..4 {
            out[2 * (4 * i + j)] = m[(i, j)].re;
            out[2 * (4 * i + j) + 1] = m[(i, j)].im;
        }
    }
    out[32] = trace(m).re;
    out
}

impl DensityAccumulator {
    pub fn push(&mut self, sample: &CMat4) {
        let x = flatten(sample);
        self.count += 1;
        let n = self.count as f64;
        for k in 0..33 {
            let delta = x[k] - self.mean[k];
            self.mean[k] += delta / n;
            self.m2[k] += delta * (x[k] - self.mean[k]);
        }
    }

    /// Adds `k` samples that are identically zero.
    pub fn push_zeros(&mut self, k: usize) {
        if k > 0 {
            self.merge(&DensityAccumulator { count: k, ..Default::default() });
        }
    }

    pub fn merge(&mut self, other: &DensityAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for k in 0..33 {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> ReducedDensity {
        let n = self.count as f64;
        let var = |k: usize| if self.count > 1 { (self.m2[k] / (n - 1.0)).max(0.0) } else { 0.0 };
        let mut elements = CMat4::zeros();
        let mut stderr = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let k = 2 * (4 * i + j);
                elements[(i, j)] = c(self.mean[k], self.mean[k + 1]);
                stderr[i][j] = ((var(k) + var(k + 1)) / n).sqrt();
            }
        }
        ReducedDensity { elements, stderr, trace_stderr: (var(32) / n).sqrt(), n_samples: self.count }
    }
}

/// Reduces the members of one snapshot to the sample mean of the subsystem
/// density matrix. Members must be grouped by ascending sample index; samples
/// without active members count as zero matrices.
pub fn reduce_snapshot(members: &[PairTrajectory], n_samples: usize) -> Result<ReducedDensity> {
    let mut time = None;
    for m in members.iter().filter(|m| m.is_active()) {
        match time {
            None => time = Some(m.time),
            Some(t) if t != m.time => return Err(Error::TimeMismatch(t, m.time)),
            _ => {}
        }
    }
    let blocks: Vec<DensityAccumulator> = members
        .par_chunk_by(|a, b| a.sample / REDUCTION_BLOCK == b.sample / REDUCTION_BLOCK)
        .map(|block| {
            let mut acc = DensityAccumulator::default();
            let first = block[0].sample / REDUCTION_BLOCK * REDUCTION_BLOCK;
            let mut next = first;
            for group in block.chunk_by(|a, b| a.sample == b.sample) {
                let s = group[0].sample;
                acc.push_zeros(s - next);
                let rho: CMat4 = group
                    .iter()
                    .filter(|m| m.is_active())
                    .map(PairTrajectory::subsystem_contribution)
                    .sum();
                acc.push(&rho);
                next = s + 1;
            }
            acc
        })
        .collect();
    let mut total = DensityAccumulator::default();
    for b in &blocks {
        total.merge(b);
    }
    if total.count > n_samples {
        return Err(Error::Invariant(format!("{} samples seen, {} expected", total.count, n_samples)));
    }
    total.push_zeros(n_samples - total.count);
    Ok(total.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetadata {
    pub model: Model,
    pub decay: DecaySpec,
    pub config: SimConfig,
}

impl RunMetadata {
    /// `key=value` lines in the configuration-file dialect.
    pub fn config_lines(&self) -> Vec<String> {
        let m = &self.model;
        let (kind, gamma) = match self.decay.kind {
            crate::model::DecayKind::IdentityUniform(g) => ("identity".to_string(), g.to_string()),
            crate::model::DecayKind::ProjectorEE(g) => ("projector_ee".to_string(), g.to_string()),
            crate::model::DecayKind::Custom => ("custom".to_string(), "nan".to_string()),
        };
        let cfg = &self.config;
        vec![
            format!("jx={}", m.spins.jx),
            format!("jy={}", m.spins.jy),
            format!("jz={}", m.spins.jz),
            format!("c={}", m.bath.coupling),
            format!("mass={}", m.bath.mass),
            format!("omega={}", m.bath.omega),
            format!("beta={}", m.bath.beta),
            format!("gamma_kind={kind}"),
            format!("gamma={gamma}"),
            format!("dt={}", cfg.dt),
            format!("steps={}", cfg.n_steps),
            format!("samples={}", cfg.n_samples),
            format!("seed={}", cfg.seed),
            format!("mode={}", cfg.mode),
            format!("initial_state={}", cfg.initial_state),
            format!("output_stride={}", cfg.output_stride),
        ]
    }

    /// Short content hash of the full configuration.
    pub fn run_id(&self) -> String {
        let mut hasher = Sha256::new();
        for line in self.config_lines() {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        for z in self.decay.matrix.iter() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
        hasher.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub rows: Vec<(f64, ReducedDensity)>,
    pub metadata: RunMetadata,
}

impl TimeSeries {
    /// Checks the invariants every run must satisfy.
    pub fn check_invariants(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Invariant(format!("times not increasing at t = {}", w[1].0)));
            }
        }
        for (t, rho) in &self.rows {
            let defect = rho.hermiticity_defect();
            if !(defect < 1e-10) {
                return Err(Error::Invariant(format!("non-Hermitian reduced density at t = {t} ({defect:e})")));
            }
            let im = rho.trace().im;
            if !(im.abs() < 1e-10) {
                return Err(Error::Invariant(format!("Im Tr = {im:e} at t = {t}")));
            }
        }
        let monotone = self.metadata.config.mode == Mode::Adiabatic && self.metadata.decay.is_positive_semidefinite();
        if monotone {
            for w in self.rows.windows(2) {
                let (a, b) = (w[0].1.trace().re, w[1].1.trace().re);
                if b > a + 1e-12 {
                    return Err(Error::Invariant(format!("trace increased from {a} to {b} at t = {}", w[1].0)));
                }
            }
        }
        Ok(())
    }

    pub fn traces(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|(t, r)| (*t, r.trace().re)).collect()
    }
}

/// Runs the ensemble and reduces every snapshot.
pub fn simulate(model: &Model, decay: &DecaySpec, config: &SimConfig) -> Result<(TimeSeries, RunSummary)> {
    let mut rows = Vec::with_capacity(config.n_steps / config.output_stride + 1);
    let summary = run_ensemble(model, decay, config, |t, members| {
        rows.push((t, reduce_snapshot(members, config.n_samples)?));
        Ok(())
    })?;
    let series = TimeSeries { rows, metadata: RunMetadata { model: *model, decay: *decay, config: *config } };
    Ok((series, summary))
}

/// Upper-triangle element order used by the CSV columns.
pub fn csv_pairs() -> Vec<(usize, usize)> {
    (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect()
}

/// One-based column of `re(Omega_ij)`; `im` and `stderr` follow it.
pub fn csv_column(i: usize, j: usize) -> usize {
    let k = csv_pairs().iter().position(|&p| p == (i.min(j), i.max(j))).expect("valid indices");
    4 + 3 * k
}

pub fn csv_header() -> String {
    let mut h = String::from("t,trace_re,trace_stderr");
    for (i, j) in csv_pairs() {
        let _ = write!(h, ",re_{0}{1},im_{0}{1},stderr_{0}{1}", i + 1, j + 1);
    }
    h
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(series: &TimeSeries, out: &mut W) -> Result<()> {
    writeln!(out, "# run_id={}", series.metadata.run_id())?;
    for line in series.metadata.config_lines() {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{}", csv_header())?;
    for (t, rho) in &series.rows {
        let mut line = format!("{},{},{}", num(*t), num(rho.trace().re), num(rho.trace_stderr));
        for (i, j) in csv_pairs() {
            let z = rho.elements[(i, j)];
            let _ = write!(line, ",{},{},{}", num(z.re), num(z.im), num(rho.stderr[i][j]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_csv_file(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(series, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Parsed CSV: comment lines (without `# `) and numeric records.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub records: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.records.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_csv(text: &str) -> Result<CsvTable> {
    let mut table = CsvTable { comments: Vec::new(), header: Vec::new(), records: Vec::new() };
    for (n, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            table.comments.push(rest.trim().to_string());
        } else if table.header.is_empty() {
            table.header = line.split(',').map(str::to_string).collect();
        } else if !line.trim().is_empty() {
            let rec = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
            if rec.len() != table.header.len() {
                return Err(Error::Parse { line: n + 1, message: "wrong field count".into() });
            }
            table.records.push(rec);
        }
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotStyle {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl std::str::FromStr for PlotStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(PlotStyle::Fig1),
            "fig2" => Ok(PlotStyle::Fig2),
            "fig3" => Ok(PlotStyle::Fig3),
            "fig4" => Ok(PlotStyle::Fig4),
            other => Err(Error::Config(format!("unknown figure style '{other}'"))),
        }
    }
}

/// Vertical offset between consecutive curves in the population figure.
pub const FIG2_SHIFT: f64 = 1.5;

/// Gnuplot script for a set of CSV files, one curve per `(path, label)`.
pub fn emit_plot_script(files: &[(PathBuf, String)], style: PlotStyle) -> Result<String> {
    for (path, _) in files {
        if !path.exists() {
            return Err(Error::MissingFile(path.display().to_string()));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel 't'");
    let curve = |col_y: usize, col_e: usize, shift: f64, path: &Path, label: &str| {
        let y = if shift == 0.0 { format!("{col_y}") } else { format!("(${col_y}-{shift})") };
        format!("'{}' using 1:{y}:{col_e} with yerrorbars title '{label}'", path.display())
    };
    let plot_all = |s: &mut String, col: usize, shifted: bool| {
        let items: Vec<String> = files
            .iter()
            .enumerate()
            .map(|(k, (p, l))| {
                let shift = if shifted { FIG2_SHIFT * k as f64 } else { 0.0 };
                curve(col, col + 2, shift, p, l)
            })
            .collect();
        let _ = writeln!(s, "plot {}", items.join(", \\\n     "));
    };
    match style {
        PlotStyle::Fig1 | PlotStyle::Fig3 => {
            let _ = writeln!(s, "set ylabel 'Tr[Omega_S]'");
            let items: Vec<String> = files.iter().map(|(p, l)| curve(2, 3, 0.0, p, l)).collect();
            let _ = writeln!(s, "plot {}", items.join(", \\\n     "));
        }
        PlotStyle::Fig2 => {
            let _ = writeln!(s, "set ylabel 'Omega_S^{{22}} (curve k shifted down by {FIG2_SHIFT} k)'");
            plot_all(&mut s, csv_column(1, 1), true);
        }
        PlotStyle::Fig4 => {
            // Both populations are drawn: the figure is described both as the
            // |ee> population and as Omega_S^{22}.
            let _ = writeln!(s, "set multiplot layout 2,1");
            let _ = writeln!(s, "set ylabel 'Omega_S^{{11}}'");
            plot_all(&mut s, csv_column(0, 0), false);
            let _ = writeln!(s, "set ylabel 'Omega_S^{{22}}'");
            plot_all(&mut s, csv_column(1, 1), false);
            let _ = writeln!(s, "unset multiplot");
        }
    }
    Ok(s)
}
