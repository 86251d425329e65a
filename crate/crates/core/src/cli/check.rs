//! Acceptance checks shared by the `check` subcommand and the acceptance test target.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::adiabatic::{analytic_energies, build_frame, hf_force, nonadiabatic_coupling};
use crate::error::Result;
use crate::linalg::{max_abs_diff, C64};
use crate::model::{decay_operator, BathParams, DecayLabel, DecaySpec, InitialState, Mode, Model, SimConfig, EE};
use crate::observables::{simulate, write_csv, TimeSeries};
use crate::oracle::{evolve, trace_law_identity, trace_law_projector};
use crate::sampler::{initial_subsystem, sample_bath_point, wigner_widths, StreamFactory};

/// Ensemble sizes used by the checks.
#[derive(Clone, Copy, Debug)]
pub struct Scale {
    /// Samples per curve for the trace-law runs.
    pub samples: usize,
    /// Samples per decoupled run compared against the exact propagator.
    pub oracle_samples: usize,
    pub determinism_samples: usize,
    pub variance_draws: usize,
}

impl Scale {
    pub fn full() -> Self {
        Self { samples: 50_000, oracle_samples: 1000, determinism_samples: 1500, variance_draws: 1_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn line(&self) -> String {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        format!("[{mark}] criterion {}: {} | {}", self.id, self.title, self.detail)
    }
}

pub const IDENTITY_GAMMAS: [f64; 4] = [0.0, 0.1, 0.5, 1.0];
pub const PROJECTOR_GAMMAS: [f64; 3] = [0.001, 0.01, 0.1];

const TRACE_LAW_TOL: f64 = 1e-8;
const CONSERVED_TRACE_TOL: f64 = 1e-10;
const RUNTIME_TARGET: Duration = Duration::from_secs(120);
const ORACLE_TOL: f64 = 1e-5;
const ENERGY_TOL: f64 = 1e-12;
const FORCE_TOL: f64 = 1e-6;
const COUPLING_TOL: f64 = 1e-10;
const VANISHING_COUPLING_TOL: f64 = 1e-12;
const VARIANCE_REL_TOL: f64 = 0.01;
const STDERR_SCALING_REL_TOL: f64 = 0.2;
const HERMITICITY_TOL: f64 = 1e-10;
/// Rounding allowance when comparing successive traces.
const MONOTONE_SLACK: f64 = 1e-12;

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    with_threads(1, f)
}

pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

struct Curve {
    gamma: f64,
    series: TimeSeries,
    elapsed: Duration,
}

fn trace_curves(label: DecayLabel, gammas: &[f64], state: InitialState, samples: usize) -> Result<Vec<Curve>> {
    gammas
        .iter()
        .map(|&gamma| {
            let decay = decay_operator(label, gamma)?;
            let config = SimConfig { n_samples: samples, initial_state: state, ..SimConfig::default() };
            let start = Instant::now();
            let (series, _) = single_threaded(|| simulate(&Model::standard(), &decay, &config))??;
            Ok(Curve { gamma, series, elapsed: start.elapsed() })
        })
        .collect()
}

fn max_deviation(series: &TimeSeries, law: impl Fn(f64) -> f64) -> f64 {
    series.traces().iter().map(|&(t, tr)| (tr - law(t)).abs()).fold(0.0, f64::max)
}

fn identity_trace_law(curves: &[Curve]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for curve in curves {
        let dev = max_deviation(&curve.series, |t| trace_law_identity(curve.gamma, t));
        let tol = if curve.gamma == 0.0 { CONSERVED_TRACE_TOL } else { TRACE_LAW_TOL };
        let fast = curve.elapsed < RUNTIME_TARGET;
        passed &= dev < tol && fast;
        parts.push(format!("g1={}: dev {dev:.2e} (< {tol:e}), {:.1}s", curve.gamma, curve.elapsed.as_secs_f64()));
    }
    Outcome {
        id: 1,
        title: "identity-decay trace law, 1-thread runtime < 120 s per curve",
        passed,
        detail: parts.join("; "),
    }
}

fn projector_trace_law(curves: &[Curve]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for curve in curves {
        let dev = max_deviation(&curve.series, |t| trace_law_projector(curve.gamma, 0.5, t));
        passed &= dev < TRACE_LAW_TOL;
        parts.push(format!("g2={}: dev {dev:.2e}", curve.gamma));
    }
    Outcome { id: 2, title: "projector-decay trace law (< 1e-8)", passed, detail: parts.join("; ") }
}

fn decoupled_reduction(samples: usize) -> Result<Outcome> {
    let model = Model { bath: BathParams { coupling: 0.0, ..BathParams::standard() }, ..Model::standard() };
    let h = crate::model::subsystem_hamiltonian(&model.spins);
    let mut passed = true;
    let mut parts = Vec::new();
    for (label, gamma) in [(DecayLabel::IdentityUniform, 0.5), (DecayLabel::ProjectorEE, 0.1)] {
        let decay = decay_operator(label, gamma)?;
        for state in [InitialState::Phi, InitialState::Psi] {
            let config = SimConfig { n_samples: samples, initial_state: state, seed: 11, ..SimConfig::default() };
            let (series, _) = simulate(&model, &decay, &config)?;
            let exact = evolve(initial_subsystem(&state), &h, &decay.matrix, config.dt, config.n_steps, 1);
            let dev = series
                .rows
                .iter()
                .zip(&exact)
                .map(|((_, rho), q)| max_abs_diff(&rho.elements, &q.rho))
                .fold(0.0, f64::max);
            passed &= dev < ORACLE_TOL && series.rows.len() == exact.len();
            parts.push(format!("{label}/{state}: {dev:.2e}"));
        }
    }
    Ok(Outcome { id: 3, title: "decoupled ensemble equals exact propagation (< 1e-5)", passed, detail: parts.join("; ") })
}

fn frame_oracles() -> Result<Outcome> {
    let model = Model::standard();
    let mut rng = StreamFactory::new(2024).bath(0);
    let mut energy_dev: f64 = 0.0;
    let mut force_dev: f64 = 0.0;
    let mut vanishing: f64 = 0.0;
    let mut force_points = 0;
    let n = 1000;
    let h = 1e-5;
    for _ in 0..n {
        let r = sample_bath_point(&model.bath, &mut rng).r;
        let frame = build_frame(&model, &r, None)?;
        let exact = analytic_energies(&model, &r)?;
        for a in 0..4 {
            energy_dev = energy_dev.max((frame.energies[a] - exact[a]).abs());
        }
        for a in 0..4 {
            let pure = frame.population(a, EE) > 0.5 || frame.population(a, 3) > 0.5;
            for b in 0..4 {
                if a == b {
                    continue;
                }
                let other_pure = frame.population(b, EE) > 0.5 || frame.population(b, 3) > 0.5;
                if pure || other_pure {
                    match nonadiabatic_coupling(&model, &frame, a, b) {
                        Ok(d) => vanishing = vanishing.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max)),
                        Err(_) => vanishing = f64::INFINITY,
                    }
                }
            }
        }
        // Finite differences of sorted energies are meaningless where two surfaces touch.
        if exact.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        force_points += 1;
        for a in 0..4 {
            let f = hf_force(&model, &frame, a);
            for k in 0..2 {
                let mut rp = r;
                let mut rm = r;
                rp[k] += h;
                rm[k] -= h;
                let ep = analytic_energies(&model, &rp)?[a];
                let em = analytic_energies(&model, &rm)?[a];
                force_dev = force_dev.max((f[k] + (ep - em) / (2.0 * h)).abs());
            }
        }
    }
    let origin = build_frame(&model, &[0.0, 0.0], None)?;
    let block: Vec<usize> = (0..4).filter(|&a| origin.population(a, EE) + origin.population(a, 3) < 0.5).collect();
    let d = nonadiabatic_coupling(&model, &origin, block[1], block[0])?;
    let expected = [C64::new(0.06, 0.0), C64::new(-0.06, 0.0)];
    let d_dev = (d[0] - expected[0]).norm().max((d[1] - expected[1]).norm());
    let passed = energy_dev < ENERGY_TOL && force_dev < FORCE_TOL && d_dev < COUPLING_TOL && vanishing < VANISHING_COUPLING_TOL;
    Ok(Outcome {
        id: 4,
        title: "energies, forces and couplings against closed forms",
        passed,
        detail: format!(
            "energy {energy_dev:.2e} over {n} points; force {force_dev:.2e} over {force_points}; \
             d(0,0) dev {d_dev:.2e}; |ee>/|gg> couplings {vanishing:.2e}"
        ),
    })
}

fn statistics(scale: &Scale) -> Result<Outcome> {
    let bp = BathParams::standard();
    let expected = 1.0 / (2.0 * (0.5 * bp.beta).tanh());
    let (sr, sp) = wigner_widths(&bp);
    let mut rng = StreamFactory::new(7).bath(0);
    let mut sums = [[0.0f64; 2]; 4];
    for _ in 0..scale.variance_draws {
        let p = sample_bath_point(&bp, &mut rng);
        for (k, x) in [p.r[0], p.r[1], p.p[0], p.p[1]].into_iter().enumerate() {
            sums[k][0] += x;
            sums[k][1] += x * x;
        }
    }
    let n = scale.variance_draws as f64;
    let worst = sums
        .iter()
        .map(|s| {
            let var = (s[1] - s[0] * s[0] / n) / (n - 1.0);
            (var / expected - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let widths_ok = (sr * sr - expected).abs() < 1e-12 && (sp * sp - expected).abs() < 1e-12;

    let stderr_at = |samples: usize| -> Result<f64> {
        let config = SimConfig { n_samples: samples, n_steps: 500, output_stride: 500, seed: 5, ..SimConfig::default() };
        let (series, _) = simulate(&Model::standard(), &DecaySpec::zero(), &config)?;
        Ok(series.rows.last().map_or(f64::NAN, |(_, rho)| rho.stderr[1][1]))
    };
    let small = stderr_at(12_500)?;
    let large = stderr_at(50_000)?;
    let ratio = small / large;
    let scaling = (ratio / 2.0 - 1.0).abs();
    let passed = worst < VARIANCE_REL_TOL && widths_ok && scaling < STDERR_SCALING_REL_TOL;
    Ok(Outcome {
        id: 5,
        title: "bath variance within 1%, stderr ~ 1/sqrt(n) within 20%",
        passed,
        detail: format!(
            "variance rel err {worst:.2e} ({} draws, target {expected:.4}); \
             stderr(Omega22, t=5): n=12500 {small:.3e}, n=50000 {large:.3e}, ratio {ratio:.3}",
            scale.variance_draws
        ),
    })
}

fn hermiticity_and_monotonicity<'a>(curves: impl Iterator<Item = &'a Curve>) -> Outcome {
    let mut worst_defect: f64 = 0.0;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut count = 0;
    for curve in curves {
        count += 1;
        for (_, rho) in &curve.series.rows {
            worst_defect = worst_defect.max(rho.hermiticity_defect());
        }
        for w in curve.series.rows.windows(2) {
            worst_rise = worst_rise.max(w[1].1.trace().re - w[0].1.trace().re);
        }
    }
    Outcome {
        id: 6,
        title: "Hermitian reduced density, nonincreasing trace",
        passed: worst_defect < HERMITICITY_TOL && worst_rise <= MONOTONE_SLACK,
        detail: format!("{count} runs; max |O - O^dag| {worst_defect:.2e}; largest trace step {worst_rise:.2e}"),
    }
}

fn determinism(samples: usize) -> Result<Outcome> {
    let mut passed = true;
    let mut parts = Vec::new();
    let runs = [
        (Mode::Adiabatic, DecayLabel::IdentityUniform, 0.5, InitialState::Phi),
        (Mode::Nonadiabatic, DecayLabel::ProjectorEE, 0.1, InitialState::Psi),
    ];
    for (mode, label, gamma, state) in runs {
        let decay = decay_operator(label, gamma)?;
        let config = SimConfig { n_samples: samples, n_steps: 300, mode, initial_state: state, seed: 99, ..SimConfig::default() };
        let mut outputs = Vec::new();
        for threads in [1, 2, 8] {
            let bytes = with_threads(threads, || -> Result<Vec<u8>> {
                let (series, _) = simulate(&Model::standard(), &decay, &config)?;
                let mut buf = Vec::new();
                write_csv(&series, &mut buf)?;
                Ok(buf)
            })??;
            outputs.push(bytes);
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        passed &= same;
        parts.push(format!("{mode}: {} bytes, {}", outputs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    Ok(Outcome { id: 7, title: "identical CSV bytes for 1, 2 and 8 threads", passed, detail: parts.join("; ") })
}

/// Runs every check, writing one line per criterion as it completes.
pub fn run_all<W: Write>(scale: &Scale, out: &mut W) -> Result<Vec<Outcome>> {
    let mut outcomes = Vec::new();
    let mut report = |o: Outcome, out: &mut W| -> Result<()> {
        writeln!(out, "{}", o.line())?;
        out.flush()?;
        outcomes.push(o);
        Ok(())
    };
    let identity = trace_curves(DecayLabel::IdentityUniform, &IDENTITY_GAMMAS, InitialState::Phi, scale.samples)?;
    report(identity_trace_law(&identity), out)?;
    let projector = trace_curves(DecayLabel::ProjectorEE, &PROJECTOR_GAMMAS, InitialState::Psi, scale.samples)?;
    report(projector_trace_law(&projector), out)?;
    report(decoupled_reduction(scale.oracle_samples)?, out)?;
    report(frame_oracles()?, out)?;
    report(statistics(scale)?, out)?;
    report(hermiticity_and_monotonicity(identity.iter().chain(&projector)), out)?;
    report(determinism(scale.determinism_samples)?, out)?;
    Ok(outcomes)
}
