//! Sequential short-time propagation of adiabatic density-matrix elements.
//!
//! Every nonzero initial element `(alpha, alpha')` of every sampled bath point
//! becomes a [`PairTrajectory`]: a classical phase-space point advected on the
//! mean surface `(E_alpha + E_alpha') / 2`, carrying the accumulated Bohr phase
//! and decay integral. Only `alpha <= alpha'` is stored; the partner
//! `(alpha', alpha)` follows the same path with conjugate phase and is folded
//! into the member's `multiplicity`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adiabatic::{
    build_frame, gamma_in_adiabatic, hf_force, transition_amplitudes, AdiabaticFrame,
};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat4, C64};
use crate::model::{DecaySpec, Mode, Model, PhasePoint, SimConfig, N_OSC};
use crate::sampler::{make_initial_condition, InitialCondition, StreamFactory};

/// Initial adiabatic elements smaller than this spawn no trajectory.
pub const SPAWN_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub enum MemberStatus {
    Active,
    Excluded(String),
}

#[derive(Clone, Debug)]
pub struct PairTrajectory {
    /// Index of the sampled bath point this member belongs to.
    pub sample: usize,
    pub alpha: usize,
    pub alpha_prime: usize,
    pub point: PhasePoint,
    /// Accumulated `int omega_{alpha alpha'} dt`.
    pub phase: f64,
    /// Accumulated `int gamma_{alpha alpha'} dt`.
    pub decay: f64,
    pub weight: C64,
    /// 1 for diagonal pairs, 2 when the member also stands for `(alpha', alpha)`.
    pub multiplicity: f64,
    pub time: f64,
    pub frame: AdiabaticFrame,
    /// Mean force at `point`.
    pub force: [f64; N_OSC],
    omega: f64,
    gamma: f64,
    pub hops: u32,
    pub status: MemberStatus,
    rng: Option<Box<ChaCha8Rng>>,
}

impl PairTrajectory {
    pub fn new(
        model: &Model,
        decay: &DecaySpec,
        sample: usize,
        pair: (usize, usize),
        weight: C64,
        multiplicity: f64,
        point: PhasePoint,
        frame: AdiabaticFrame,
    ) -> Self {
        let mut member = Self {
            sample,
            alpha: pair.0,
            alpha_prime: pair.1,
            point,
            phase: 0.0,
            decay: 0.0,
            weight,
            multiplicity,
            time: 0.0,
            frame,
            force: [0.0; N_OSC],
            omega: 0.0,
            gamma: 0.0,
            hops: 0,
            status: MemberStatus::Active,
            rng: None,
        };
        member.refresh(model, decay);
        member
    }

    /// Attaches the random stream used for stochastic transitions.
    pub fn with_rng(mut self, rng: ChaCha8Rng) -> Self {
        self.rng = Some(Box::new(rng));
        self
    }

    pub fn is_active(&self) -> bool {
        self.status == MemberStatus::Active
    }

    /// Current value `w e^{-i phase} e^{-decay}` of the adiabatic element.
    pub fn element(&self) -> C64 {
        self.weight * C64::from_polar((-self.decay).exp(), -self.phase)
    }

    /// Subsystem-basis contribution, Hermitian by construction.
    pub fn subsystem_contribution(&self) -> CMat4 {
        let z = self.element() * (0.5 * self.multiplicity);
        let u = &self.frame.vectors;
        let (a, b) = (self.alpha, self.alpha_prime);
        CMat4::from_fn(|i, j| {
            let x = z * u[(i, a)] * u[(j, b)].conj();
            let y = z * u[(j, a)] * u[(i, b)].conj();
            x + y.conj()
        })
    }

    fn refresh(&mut self, model: &Model, decay: &DecaySpec) {
        self.force = mean_force(model, &self.frame, self.alpha, self.alpha_prime);
        self.omega = self.frame.energies[self.alpha] - self.frame.energies[self.alpha_prime];
        self.gamma = self.frame.decay_diagonal(decay, self.alpha)
            + self.frame.decay_diagonal(decay, self.alpha_prime);
    }
}

fn mean_force(model: &Model, frame: &AdiabaticFrame, a: usize, b: usize) -> [f64; N_OSC] {
    let fa = hf_force(model, frame, a);
    if a == b {
        return fa;
    }
    let fb = hf_force(model, frame, b);
    std::array::from_fn(|k| 0.5 * (fa[k] + fb[k]))
}

/// One velocity-Verlet step: half kick with `force`, drift, half kick with the
/// force returned by `force_at` at the new position.
pub fn classical_step<E>(
    point: &PhasePoint,
    force: [f64; N_OSC],
    mass: f64,
    dt: f64,
    mut force_at: impl FnMut(&[f64; N_OSC]) -> std::result::Result<[f64; N_OSC], E>,
) -> std::result::Result<(PhasePoint, [f64; N_OSC]), E> {
    let mut next = *point;
    for k in 0..N_OSC {
        next.p[k] += 0.5 * dt * force[k];
        next.r[k] += dt * next.p[k] / mass;
    }
    let new_force = force_at(&next.r)?;
    for k in 0..N_OSC {
        next.p[k] += 0.5 * dt * new_force[k];
    }
    Ok((next, new_force))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpOutcome {
    Jumped(PhasePoint),
    /// Energetically forbidden; the hop is rejected.
    Frustrated,
}

/// Shifts the momentum along `direction` so that the kinetic energy changes by
/// `-delta_e`.
pub fn momentum_jump(point: &PhasePoint, direction: &[f64; N_OSC], delta_e: f64, mass: f64) -> JumpOutcome {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if delta_e == 0.0 || norm == 0.0 {
        return if delta_e == 0.0 { JumpOutcome::Jumped(*point) } else { JumpOutcome::Frustrated };
    }
    let unit = direction.map(|x| x / norm);
    let along: f64 = (0..N_OSC).map(|k| point.p[k] * unit[k]).sum();
    let radicand = along * along - 2.0 * mass * delta_e;
    if radicand < 0.0 {
        return JumpOutcome::Frustrated;
    }
    let sign = if along < 0.0 { -1.0 } else { 1.0 };
    let shift = sign * radicand.sqrt() - along;
    let mut next = *point;
    for k in 0..N_OSC {
        next.p[k] += shift * unit[k];
    }
    JumpOutcome::Jumped(next)
}

/// Advances one member by `dt`.
///
/// The phase and decay integrals use the trapezoid rule over the frames at the
/// two ends of the step. In [`Mode::Nonadiabatic`] one transition branch is
/// then sampled at the end point.
pub fn sstp_step(
    member: &mut PairTrajectory,
    model: &Model,
    decay: &DecaySpec,
    dt: f64,
    mode: Mode,
) -> Result<()> {
    let (start_omega, start_gamma) = (member.omega, member.gamma);
    let mut landed: Option<(AdiabaticFrame, usize, usize)> = None;
    let prev = &member.frame;
    let (alpha, alpha_prime) = (member.alpha, member.alpha_prime);
    let (point, force) = classical_step(&member.point, member.force, model.bath.mass, dt, |r| {
        let frame = build_frame(model, r, Some(prev))?;
        let a = frame.track(alpha);
        let b = frame.track(alpha_prime);
        let f = mean_force(model, &frame, a, b);
        landed = Some((frame, a, b));
        Ok::<_, Error>(f)
    })?;
    let (frame, a, b) = landed.expect("force evaluated at new position");
    member.point = point;
    member.frame = frame;
    member.alpha = a;
    member.alpha_prime = b;
    member.force = force;
    member.omega = frame.energies[a] - frame.energies[b];
    member.gamma = frame.decay_diagonal(decay, a) + frame.decay_diagonal(decay, b);
    member.phase += 0.5 * dt * (start_omega + member.omega);
    member.decay += 0.5 * dt * (start_gamma + member.gamma);
    member.time += dt;

    if mode == Mode::Nonadiabatic {
        sample_transition(member, model, decay, dt)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
enum Channel {
    /// First index moves to `to` via the derivative coupling.
    CouplingFirst(usize),
    CouplingSecond(usize),
    /// First index moves to `to` via the off-diagonal decay operator.
    DecayFirst(usize),
    DecaySecond(usize),
}

fn sample_transition(member: &mut PairTrajectory, model: &Model, decay: &DecaySpec, dt: f64) -> Result<()> {
    let gamma = gamma_in_adiabatic(decay, &member.frame);
    let table = transition_amplitudes(model, &member.frame, &member.point, &gamma)?;
    let (a, ap) = (member.alpha, member.alpha_prime);

    let mut channels: Vec<(Channel, C64)> = Vec::with_capacity(12);
    for b in 0..4 {
        if b != a {
            // (b, a') <- (a, a')
            let hop = -table.hop[b][a] * dt;
            if hop.norm() > 0.0 {
                channels.push((Channel::CouplingFirst(b), hop));
            }
            let g = -gamma.offdiag[(b, a)] * dt;
            if g.norm() > 0.0 {
                channels.push((Channel::DecayFirst(b), g));
            }
        }
        if b != ap {
            // (a, b) <- (a, a')
            let hop = -table.hop[b][ap].conj() * dt;
            if hop.norm() > 0.0 {
                channels.push((Channel::CouplingSecond(b), hop));
            }
            let g = -gamma.offdiag[(ap, b)] * dt;
            if g.norm() > 0.0 {
                channels.push((Channel::DecaySecond(b), g));
            }
        }
    }
    if channels.is_empty() {
        return Ok(());
    }

    let total: f64 = 1.0 + channels.iter().map(|(_, z)| z.norm()).sum::<f64>();
    let rng = member
        .rng
        .as_mut()
        .ok_or_else(|| Error::Config("nonadiabatic member without a random stream".into()))?;
    let mut u = rng.random::<f64>() * total;
    if u < 1.0 {
        member.weight *= total;
        return Ok(());
    }
    u -= 1.0;
    let mut chosen = channels[channels.len() - 1];
    for ch in &channels {
        if u < ch.1.norm() {
            chosen = *ch;
            break;
        }
        u -= ch.1.norm();
    }
    let (channel, amplitude) = chosen;
    let factor = amplitude * (total / amplitude.norm());
    let energies = member.frame.energies;
    let mass = model.bath.mass;
    let jump = |from: usize, to: usize, point: &PhasePoint| {
        let d = table.d[to][from].map(|z| z.re);
        // Mean-surface energy changes by half the gap of the moving index.
        momentum_jump(point, &d, 0.5 * (energies[to] - energies[from]), mass)
    };
    match channel {
        Channel::CouplingFirst(to) => match jump(a, to, &member.point) {
            JumpOutcome::Jumped(p) => {
                member.point = p;
                member.alpha = to;
            }
            JumpOutcome::Frustrated => return Ok(()),
        },
        Channel::CouplingSecond(to) => match jump(ap, to, &member.point) {
            JumpOutcome::Jumped(p) => {
                member.point = p;
                member.alpha_prime = to;
            }
            JumpOutcome::Frustrated => return Ok(()),
        },
        Channel::DecayFirst(to) => member.alpha = to,
        Channel::DecaySecond(to) => member.alpha_prime = to,
    }
    member.weight *= factor;
    member.hops += 1;
    member.refresh(model, decay);
    Ok(())
}

/// Members spawned from one initial condition, in `(alpha <= alpha')` row-major order.
pub fn spawn_members(
    model: &Model,
    decay: &DecaySpec,
    config: &SimConfig,
    streams: &StreamFactory,
    sample: usize,
    ic: &InitialCondition,
) -> Vec<PairTrajectory> {
    let mut out = Vec::new();
    let mut slot = 0u64;
    for a in 0..4 {
        for b in a..4 {
            let w = ic.adiabatic_elements[(a, b)];
            if w.norm() <= SPAWN_THRESHOLD {
                continue;
            }
            let multiplicity = if a == b { 1.0 } else { 2.0 };
            let weight = if a == b { c(w.re, 0.0) } else { w };
            let mut m = PairTrajectory::new(model, decay, sample, (a, b), weight, multiplicity, ic.point, ic.frame0);
            if config.mode == Mode::Nonadiabatic {
                m = m.with_rng(streams.hops(sample as u64, slot));
            }
            out.push(m);
            slot += 1;
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub n_samples: usize,
    pub n_members: usize,
    pub excluded: usize,
    /// Sum of `|initial weight| * multiplicity` over excluded members.
    pub excluded_weight: f64,
    pub hops: u64,
    pub reasons: Vec<String>,
}

pub struct EnsembleState {
    pub members: Vec<PairTrajectory>,
    pub t: f64,
    pub steps_taken: usize,
    pub config: SimConfig,
    pub model: Model,
    pub decay: DecaySpec,
}

impl EnsembleState {
    /// Samples all initial conditions and spawns their members.
    pub fn new(model: &Model, decay: &DecaySpec, config: &SimConfig) -> Result<Self> {
        config.validate()?;
        model.bath.validate()?;
        let streams = StreamFactory::new(config.seed);
        let per_sample: Vec<Vec<PairTrajectory>> = (0..config.n_samples)
            .into_par_iter()
            .map(|i| {
                let ic = make_initial_condition(model, &config.initial_state, &mut streams.bath(i as u64))?;
                Ok(spawn_members(model, decay, config, &streams, i, &ic))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            members: per_sample.into_iter().flatten().collect(),
            t: 0.0,
            steps_taken: 0,
            config: *config,
            model: *model,
            decay: *decay,
        })
    }

    /// Advances every active member by `steps` steps, in parallel.
    pub fn advance(&mut self, steps: usize) {
        let (model, decay, dt, mode) = (&self.model, &self.decay, self.config.dt, self.config.mode);
        self.members.par_iter_mut().for_each(|m| {
            for _ in 0..steps {
                if !m.is_active() {
                    break;
                }
                if let Err(e) = sstp_step(m, model, decay, dt, mode) {
                    m.status = MemberStatus::Excluded(e.to_string());
                }
            }
        });
        self.steps_taken += steps;
        self.t = self.steps_taken as f64 * dt;
    }

    pub fn summary(&self) -> RunSummary {
        let mut s = RunSummary {
            n_samples: self.config.n_samples,
            n_members: self.members.len(),
            ..Default::default()
        };
        for m in &self.members {
            s.hops += m.hops as u64;
            if let MemberStatus::Excluded(reason) = &m.status {
                s.excluded += 1;
                s.excluded_weight += m.weight.norm() * m.multiplicity;
                if !s.reasons.contains(reason) {
                    s.reasons.push(reason.clone());
                }
            }
        }
        s
    }
}

/// Runs the full ensemble, handing `observe` the member list at `t = 0` and
/// after every `output_stride` steps.
pub fn run_ensemble(
    model: &Model,
    decay: &DecaySpec,
    config: &SimConfig,
    mut observe: impl FnMut(f64, &[PairTrajectory]) -> Result<()>,
) -> Result<RunSummary> {
    let mut state = EnsembleState::new(model, decay, config)?;
    observe(0.0, &state.members)?;
    while state.steps_taken < config.n_steps {
        let chunk = config.output_stride.min(config.n_steps - state.steps_taken);
        state.advance(chunk);
        if state.steps_taken % config.output_stride == 0 {
            observe(state.t, &state.members)?;
        }
    }
    Ok(state.summary())
}
