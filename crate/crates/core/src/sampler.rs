//! Initial conditions: thermal Wigner sampling of the bath and the factorized
//! subsystem state projected onto the adiabatic frame at the sampled point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adiabatic::{build_frame, AdiabaticFrame};
use crate::error::Result;
use crate::linalg::CMat4;
use crate::model::{BathParams, InitialState, Model, PhasePoint, N_OSC};

/// Key offset separating transition-sampling streams from bath-sampling streams.
const HOP_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

/// Deterministic per-trajectory random streams derived from a master seed.
///
/// Stream selection is by counter, never by draw order, so results do not
/// depend on how samples are distributed across workers.
#[derive(Clone, Copy, Debug)]
pub struct StreamFactory {
    pub seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Stream used to draw the initial bath point of sample `index`.
    pub fn bath(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Stream used for stochastic transitions of member `slot` of sample `index`.
    pub fn hops(&self, index: u64, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ HOP_KEY);
        rng.set_stream(index.wrapping_mul(16).wrapping_add(slot));
        rng
    }
}

/// Widths `(sigma_R, sigma_P)` of the thermal Wigner distribution of one oscillator.
pub fn wigner_widths(bp: &BathParams) -> (f64, f64) {
    let t = (0.5 * bp.beta * bp.omega).tanh();
    let var_r = 1.0 / (2.0 * bp.mass * bp.omega * t);
    let var_p = bp.mass * bp.omega / (2.0 * t);
    (var_r.sqrt(), var_p.sqrt())
}

/// Draws `(R, P)` from `exp[-2 tanh(beta omega / 2) / omega * H_B(R, P)]`.
pub fn sample_bath_point<R: Rng + ?Sized>(bp: &BathParams, rng: &mut R) -> PhasePoint {
    let (sr, sp) = wigner_widths(bp);
    let mut point = PhasePoint::default();
    for k in 0..N_OSC {
        let zr: f64 = rng.sample(StandardNormal);
        let zp: f64 = rng.sample(StandardNormal);
        point.r[k] = sr * zr;
        point.p[k] = sp * zp;
    }
    point
}

/// Pure-state projector `|psi><psi|` of the initial subsystem state.
pub fn initial_subsystem(state: &InitialState) -> CMat4 {
    let ket = state.ket();
    CMat4::from_fn(|i, j| ket[i] * ket[j].conj())
}

#[derive(Clone, Debug)]
pub struct InitialCondition {
    pub point: PhasePoint,
    /// Subsystem density matrix expressed in `frame0`.
    pub adiabatic_elements: CMat4,
    pub frame0: AdiabaticFrame,
}

pub fn make_initial_condition<R: Rng + ?Sized>(
    model: &Model,
    state: &InitialState,
    rng: &mut R,
) -> Result<InitialCondition> {
    let point = sample_bath_point(&model.bath, rng);
    initial_condition_at(model, state, point)
}

/// Initial condition at a given bath point.
pub fn initial_condition_at(model: &Model, state: &InitialState, point: PhasePoint) -> Result<InitialCondition> {
    let frame0 = build_frame(model, &point.r, None)?;
    let adiabatic_elements = frame0.to_adiabatic(&initial_subsystem(state));
    Ok(InitialCondition { point, adiabatic_elements, frame0 })
}
