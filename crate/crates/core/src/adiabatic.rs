//! Adiabatic frames of `h_W(R)` and the quantities derived from them.
//!
//! Eigenvectors are gauge fixed so that each column's leading component of
//! largest magnitude is real and positive. A frame built with a `previous`
//! frame instead tracks states by overlap: old column `i` continues as new
//! column `tracking[i]`, with its phase chosen so that the overlap is real and
//! positive. Energies are always stored in ascending order, so a state that
//! crosses another changes its sorted index but keeps its tracked identity.

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, CMat4, C64};
use crate::model::{DecayKind, DecaySpec, Model, PhasePoint, EE, N_OSC, SIGMA_Z};

/// Energy gap below which two adiabatic states are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Off-diagonal coupling matrix elements below this are structural zeros.
const COUPLING_ZERO: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeTag {
    /// Largest-magnitude component of every column is real positive.
    LargestComponent,
    /// Columns were matched to a previous frame; `tracking[old] = new`.
    Aligned { tracking: [usize; 4] },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticFrame {
    pub r: [f64; N_OSC],
    /// Ascending adiabatic energies.
    pub energies: [f64; 4],
    /// Columns are `|alpha; R>` in the subsystem basis.
    pub vectors: CMat4,
    pub gauge: GaugeTag,
}

impl AdiabaticFrame {
    /// Maps a state index of the previous frame to this one.
    pub fn track(&self, old: usize) -> usize {
        match self.gauge {
            GaugeTag::Aligned { tracking } => tracking[old],
            GaugeTag::LargestComponent => old,
        }
    }

    pub fn population(&self, alpha: usize, basis: usize) -> f64 {
        self.vectors[(basis, alpha)].norm_sqr()
    }

    /// `<alpha| Gamma |alpha>` without forming the full rotated matrix.
    pub fn decay_diagonal(&self, decay: &DecaySpec, alpha: usize) -> f64 {
        match decay.kind {
            DecayKind::IdentityUniform(g) => return g,
            DecayKind::ProjectorEE(g) => return g * self.population(alpha, EE),
            DecayKind::Custom => {}
        }
        let u = self.vectors.column(alpha);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..4 {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..4 {
                row += decay.matrix[(i, j)] * u[j];
            }
            acc += u[i].conj() * row;
        }
        acc.re
    }

    /// Rotates an adiabatic-basis matrix to the subsystem basis: `U A U^dag`.
    pub fn to_subsystem(&self, adiabatic: &CMat4) -> CMat4 {
        self.vectors * adiabatic * self.vectors.adjoint()
    }

    /// Rotates a subsystem-basis matrix to the adiabatic basis: `U^dag A U`.
    pub fn to_adiabatic(&self, subsystem: &CMat4) -> CMat4 {
        self.vectors.adjoint() * subsystem * self.vectors
    }
}

/// Diagonalizes `h_W(R)` and fixes the eigenvector gauge.
///
/// Within a degenerate group the vectors are re-chosen to diagonalize the
/// projected spin-bath coupling. With `previous`, columns are matched to it by
/// maximal total overlap and phase aligned against it.
pub fn build_frame(
    model: &Model,
    r: &[f64; N_OSC],
    previous: Option<&AdiabaticFrame>,
) -> Result<AdiabaticFrame> {
    let h = model.h_w(r);
    let (raw_e, raw_u) = hermitian_eigen(&h)?;

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| raw_e[a].total_cmp(&raw_e[b]));
    let mut energies = [0.0; 4];
    let mut vectors = CMat4::zeros();
    for (slot, &src) in order.iter().enumerate() {
        energies[slot] = raw_e[src];
        vectors.set_column(slot, &raw_u.column(src));
    }

    split_degenerate_groups(model, &energies, &mut vectors)?;

    for j in 0..4 {
        fix_largest_component(&mut vectors, j);
    }

    let gauge = match previous {
        None => GaugeTag::LargestComponent,
        Some(prev) => GaugeTag::Aligned { tracking: align_to(prev, &mut vectors) },
    };

    Ok(AdiabaticFrame { r: *r, energies, vectors, gauge })
}

fn split_degenerate_groups(model: &Model, energies: &[f64; 4], vectors: &mut CMat4) -> Result<()> {
    let weights = [1.0, std::f64::consts::SQRT_2];
    let probe: [f64; 4] = std::array::from_fn(|i| {
        -model.bath.coupling * (weights[0] * SIGMA_Z[0][i] + weights[1] * SIGMA_Z[1][i])
    });
    let mut start = 0;
    while start < 4 {
        let mut end = start + 1;
        while end < 4 && energies[end] - energies[end - 1] < DEGENERACY_TOL {
            end += 1;
        }
        let size = end - start;
        if size > 1 {
            // Projected coupling in the top-left block, padded with zeros.
            let mut proj = CMat4::zeros();
            for a in 0..size {
                for b in 0..size {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..4 {
                        acc += vectors[(i, start + a)].conj() * probe[i] * vectors[(i, start + b)];
                    }
                    proj[(a, b)] = acc;
                }
            }
            let (pe, pv) = hermitian_eigen(&proj)?;
            let mut sub: Vec<usize> = (0..size).collect();
            sub.sort_by(|&a, &b| pe[a].total_cmp(&pe[b]));
            let old = *vectors;
            for (slot, &k) in sub.iter().enumerate() {
                for i in 0..4 {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..size {
                        acc += old[(i, start + a)] * pv[(a, k)];
                    }
                    vectors[(i, start + slot)] = acc;
                }
            }
        }
        start = end;
    }
    Ok(())
}

fn fix_largest_component(vectors: &mut CMat4, j: usize) {
    let max = (0..4).map(|i| vectors[(i, j)].norm_sqr()).fold(0.0, f64::max).sqrt();
    // First component within a hair of the maximum, so exact ties stay stable.
    let lead = (0..4)
        .find(|&i| vectors[(i, j)].norm_sqr().sqrt() >= max - 1e-8)
        .unwrap_or(0);
    let z = vectors[(lead, j)];
    let n = z.norm_sqr().sqrt();
    if n > 0.0 {
        let phase = z.conj() / n;
        for i in 0..4 {
            vectors[(i, j)] *= phase;
        }
        vectors[(lead, j)] = c(vectors[(lead, j)].norm_sqr().sqrt(), 0.0);
    }
}

fn align_to(prev: &AdiabaticFrame, vectors: &mut CMat4) -> [usize; 4] {
    let overlap = CMat4::from_fn(|i, j| {
        (0..4).fold(C64::new(0.0, 0.0), |acc, k| acc + prev.vectors[(k, i)].conj() * vectors[(k, j)])
    });
    let weight: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| overlap[(i, j)].norm_sqr()));

    // Weights are doubly stochastic: if every row has an entry above 1/2, those
    // entries sit in distinct columns and beat every other assignment.
    let dominant: [Option<usize>; 4] = std::array::from_fn(|i| (0..4).find(|&j| weight[i][j] > 0.5));
    let best = if dominant.iter().all(Option::is_some) {
        dominant.map(|j| j.unwrap_or_default())
    } else {
        let mut best = [0, 1, 2, 3];
        let mut best_score = f64::NEG_INFINITY;
        for perm in PERMUTATIONS_4 {
            let score: f64 = (0..4).map(|i| weight[i][perm[i]]).sum();
            if score > best_score {
                best_score = score;
                best = perm;
            }
        }
        best
    };
    for (i, &j) in best.iter().enumerate() {
        let o = overlap[(i, j)];
        let n = o.norm_sqr().sqrt();
        if n > 1e-12 {
            let phase = o.conj() / n;
            for k in 0..4 {
                vectors[(k, j)] *= phase;
            }
        }
    }
    best
}

const PERMUTATIONS_4: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

/// Closed-form spectrum for `jx == jy`, where `|ee>` and `|gg>` decouple from the
/// `{|eg>, |ge>}` block.
pub fn analytic_energies(model: &Model, r: &[f64; N_OSC]) -> Result<[f64; 4]> {
    let sp = model.spins;
    if sp.jx != sp.jy {
        return Err(Error::AnalyticUnavailable { jx: sp.jx, jy: sp.jy });
    }
    let cp = model.bath.coupling;
    let v = crate::model::bath_potential(&model.bath, r);
    let sum = r[0] + r[1];
    let diff = r[0] - r[1];
    let half_gap = ((sp.jx + sp.jy).powi(2) + (cp * diff).powi(2)).sqrt();
    let mut e = [
        -sp.jz - cp * sum + v,
        -sp.jz + cp * sum + v,
        sp.jz - half_gap + v,
        sp.jz + half_gap + v,
    ];
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// `omega_{alpha alpha'} = E_alpha - E_alpha'`.
pub fn bohr_frequency(frame: &AdiabaticFrame, alpha: usize, alpha_prime: usize) -> f64 {
    frame.energies[alpha] - frame.energies[alpha_prime]
}

/// Hellmann-Feynman force `-<alpha| dh_W/dR |alpha>`.
///
/// Still evaluated next to a degeneracy; see [`degenerate_partners`].
pub fn hf_force(model: &Model, frame: &AdiabaticFrame, alpha: usize) -> [f64; N_OSC] {
    std::array::from_fn(|k| {
        let g = model.h_w_gradient(&frame.r, k);
        -(0..4).map(|i| frame.population(alpha, i) * g[i]).sum::<f64>()
    })
}

/// States whose energy lies within [`DEGENERACY_TOL`] of `alpha`.
pub fn degenerate_partners(frame: &AdiabaticFrame, alpha: usize) -> Vec<usize> {
    (0..4)
        .filter(|&b| b != alpha && (frame.energies[b] - frame.energies[alpha]).abs() < DEGENERACY_TOL)
        .collect()
}

/// `<alpha| dH_SB/dR_k |beta>`; the harmonic part is proportional to the
/// identity and drops out between orthogonal states.
fn coupling_element(model: &Model, frame: &AdiabaticFrame, alpha: usize, beta: usize) -> [C64; N_OSC] {
    std::array::from_fn(|k| {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..4 {
            acc += frame.vectors[(i, alpha)].conj()
                * (-model.bath.coupling * SIGMA_Z[k][i])
                * frame.vectors[(i, beta)];
        }
        acc
    })
}

/// Derivative coupling `d_{alpha beta} = <alpha| dh/dR |beta> / (E_beta - E_alpha)`.
pub fn nonadiabatic_coupling(
    model: &Model,
    frame: &AdiabaticFrame,
    alpha: usize,
    beta: usize,
) -> Result<[C64; N_OSC]> {
    let zero = [C64::new(0.0, 0.0); N_OSC];
    if alpha == beta {
        return Ok(zero);
    }
    let num = coupling_element(model, frame, alpha, beta);
    if num.iter().all(|z| z.norm() <= COUPLING_ZERO) {
        return Ok(zero);
    }
    let gap = frame.energies[beta] - frame.energies[alpha];
    if gap.abs() < DEGENERACY_TOL {
        return Err(Error::DegeneratePair { alpha, beta, gap });
    }
    Ok(num.map(|z| z / gap))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaAdiabatic {
    pub full: CMat4,
    pub diag: [f64; 4],
    pub offdiag: CMat4,
}

pub fn gamma_in_adiabatic(decay: &DecaySpec, frame: &AdiabaticFrame) -> GammaAdiabatic {
    let full = frame.to_adiabatic(&decay.matrix);
    let diag = std::array::from_fn(|i| full[(i, i)].re);
    let mut offdiag = full;
    for i in 0..4 {
        offdiag[(i, i)] -= c(diag[i], 0.0);
    }
    GammaAdiabatic { full, diag, offdiag }
}

/// `gamma_{alpha alpha'} = Gamma_d^{alpha alpha} + Gamma_d^{alpha' alpha'}`.
pub fn gamma_rate(gamma: &GammaAdiabatic, alpha: usize, alpha_prime: usize) -> f64 {
    gamma.diag[alpha] + gamma.diag[alpha_prime]
}

/// Transition channels at one phase-space point.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTable {
    /// `d[a][b]`, the derivative coupling vector.
    pub d: [[[C64; N_OSC]; 4]; 4],
    /// `(P/M) . d_ab`, the hop weight of the `a <- b` channel.
    pub hop: [[C64; 4]; 4],
    /// Momentum shift `S_ab`; `None` where the hop weight vanishes.
    pub shift: [[Option<[C64; N_OSC]>; 4]; 4],
    /// Off-diagonal part of the decay operator in this frame.
    pub gamma_offdiag: CMat4,
}

impl TransitionTable {
    /// Decay-driven transition element from pair `(b, b')` into `(a, a')`.
    pub fn t_gamma(&self, a: usize, ap: usize, b: usize, bp: usize) -> C64 {
        let mut v = C64::new(0.0, 0.0);
        if ap == bp {
            v += self.gamma_offdiag[(a, b)];
        }
        if a == b {
            v += self.gamma_offdiag[(bp, ap)];
        }
        v
    }

    /// Zeroth-order part of the coupling transition from `(b, b')` into `(a, a')`,
    /// i.e. the operator with momentum derivatives dropped.
    pub fn t_hop(&self, a: usize, ap: usize, b: usize, bp: usize) -> C64 {
        let mut v = C64::new(0.0, 0.0);
        if ap == bp {
            v += self.hop[a][b];
        }
        if a == b {
            v += self.hop[ap][bp].conj();
        }
        v
    }
}

pub fn transition_amplitudes(
    model: &Model,
    frame: &AdiabaticFrame,
    point: &PhasePoint,
    gamma: &GammaAdiabatic,
) -> Result<TransitionTable> {
    let zero = C64::new(0.0, 0.0);
    let mut table = TransitionTable {
        d: [[[zero; N_OSC]; 4]; 4],
        hop: [[zero; 4]; 4],
        shift: [[None; 4]; 4],
        gamma_offdiag: gamma.offdiag,
    };
    let m = model.bath.mass;
    for a in 0..4 {
        for b in 0..4 {
            if a == b {
                continue;
            }
            let d = nonadiabatic_coupling(model, frame, a, b)?;
            let w: C64 = (0..N_OSC).map(|k| d[k] * (point.p[k] / m)).sum();
            table.d[a][b] = d;
            table.hop[a][b] = w;
            if w.norm() > COUPLING_ZERO {
                let omega = bohr_frequency(frame, a, b);
                table.shift[a][b] = Some(d.map(|dk| dk * omega / w));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, real_diag};
    use crate::model::{decay_operator, BathParams, DecayLabel, EE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standard() -> Model {
        Model::standard()
    }

    fn residual(model: &Model, f: &AdiabaticFrame) -> f64 {
        let h = model.h_w(&f.r);
        max_abs_diff(&(h * f.vectors), &(f.vectors * real_diag(f.energies)))
    }

    #[test]
    fn spectrum_at_origin() {
        let f = build_frame(&standard(), &[0.0, 0.0], None).unwrap();
        let expected = [-1.5, -0.5, -0.5, 2.5];
        for (e, x) in f.energies.iter().zip(expected) {
            assert!((e - x).abs() < 1e-14);
        }
        // Degenerate pair resolved into |ee> (lower coupling projection) and |gg>.
        assert_eq!(f.vectors[(EE, 1)], c(1.0, 0.0));
        assert_eq!(f.vectors[(3, 2)], c(1.0, 0.0));
    }

    #[test]
    fn spectrum_off_origin() {
        let model = standard();
        let f = build_frame(&model, &[1.0, 0.0], None).unwrap();
        let root = (4.0f64 + 0.24f64 * 0.24).sqrt();
        let expected = [1.0 - root, -0.24, 0.24, 1.0 + root];
        for (e, x) in f.energies.iter().zip(expected) {
            assert!((e - x).abs() < 1e-13, "{e} vs {x}");
        }
        assert!((f.energies[0] + 1.014348).abs() < 1e-6);
        let analytic = analytic_energies(&model, &[1.0, 0.0]).unwrap();
        for (a, b) in analytic.iter().zip(f.energies) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_frame_is_position_independent() {
        let model = Model { bath: BathParams { coupling: 0.0, ..BathParams::standard() }, ..standard() };
        let f0 = build_frame(&model, &[0.0, 0.0], None).unwrap();
        let f1 = build_frame(&model, &[1.3, -2.1], None).unwrap();
        let v = crate::model::bath_potential(&model.bath, &[1.3, -2.1]);
        for i in 0..4 {
            assert!((f1.energies[i] - f0.energies[i] - v).abs() < 1e-13);
        }
        assert!(max_abs_diff(&f0.vectors, &f1.vectors) < 1e-14);
    }

    #[test]
    fn analytic_energies_refuses_anisotropy() {
        let mut model = standard();
        model.spins.jy = -0.5;
        assert!(matches!(
            analytic_energies(&model, &[0.0, 0.0]),
            Err(Error::AnalyticUnavailable { .. })
        ));
    }

    #[test]
    fn bohr_frequencies() {
        let f = build_frame(&standard(), &[0.0, 0.0], None).unwrap();
        assert_eq!(bohr_frequency(&f, 2, 2), 0.0);
        assert!((bohr_frequency(&f, 3, 0) - 4.0).abs() < 1e-14);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(bohr_frequency(&f, a, b), -bohr_frequency(&f, b, a));
            }
        }
    }

    #[test]
    fn forces_examples() {
        let model = standard();
        let f = build_frame(&model, &[0.0, 0.0], None).unwrap();
        let ee = (0..4).find(|&a| f.population(a, EE) > 0.5).unwrap();
        let force = hf_force(&model, &f, ee);
        assert!((force[0] - 0.24).abs() < 1e-14 && (force[1] - 0.24).abs() < 1e-14);
        assert_eq!(degenerate_partners(&f, ee).len(), 1);

        let free = Model { bath: BathParams { coupling: 0.0, ..BathParams::standard() }, ..model };
        let f = build_frame(&free, &[1.0, 2.0], None).unwrap();
        for a in 0..4 {
            let force = hf_force(&free, &f, a);
            assert!((force[0] + 1.0).abs() < 1e-14 && (force[1] + 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn forces_match_finite_differences() {
        let model = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        let mut checked = 0;
        while checked < 300 {
            let r: [f64; 2] = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            if (r[0] + r[1]).abs() < 1e-3 {
                continue;
            }
            let f = build_frame(&model, &r, None).unwrap();
            for a in 0..4 {
                let force = hf_force(&model, &f, a);
                for k in 0..2 {
                    let mut plus = r;
                    let mut minus = r;
                    plus[k] += h;
                    minus[k] -= h;
                    let ep = build_frame(&model, &plus, None).unwrap().energies[a];
                    let em = build_frame(&model, &minus, None).unwrap().energies[a];
                    let fd = -(ep - em) / (2.0 * h);
                    assert!((fd - force[k]).abs() < 1e-6, "R={r:?} a={a} k={k}: {fd} vs {}", force[k]);
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn derivative_coupling_in_block() {
        let model = standard();
        let f = build_frame(&model, &[0.0, 0.0], None).unwrap();
        let d = nonadiabatic_coupling(&model, &f, 3, 0).unwrap();
        assert!((d[0] - c(0.06, 0.0)).norm() < 1e-12);
        assert!((d[1] - c(-0.06, 0.0)).norm() < 1e-12);
        for a in [1, 2] {
            for b in 0..4 {
                let d = nonadiabatic_coupling(&model, &f, a, b).unwrap();
                assert!(d.iter().all(|z| z.norm() < 1e-12));
                let d = nonadiabatic_coupling(&model, &f, b, a).unwrap();
                assert!(d.iter().all(|z| z.norm() < 1e-12));
            }
        }
    }

    #[test]
    fn derivative_coupling_matches_overlap_derivative() {
        // d_ab = <a| d/dR_k |b> by central differences of gauge-aligned frames.
        let model = standard();
        let r = [0.7, -1.9];
        let h = 1e-6;
        let f = build_frame(&model, &r, None).unwrap();
        for k in 0..2 {
            let mut plus = r;
            let mut minus = r;
            plus[k] += h;
            minus[k] -= h;
            let fp = build_frame(&model, &plus, Some(&f)).unwrap();
            let fm = build_frame(&model, &minus, Some(&f)).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    if a == b {
                        continue;
                    }
                    let bp = fp.track(b);
                    let bm = fm.track(b);
                    let mut fd = C64::new(0.0, 0.0);
                    for i in 0..4 {
                        fd += f.vectors[(i, a)].conj() * (fp.vectors[(i, bp)] - fm.vectors[(i, bm)]);
                    }
                    fd /= 2.0 * h;
                    let d = nonadiabatic_coupling(&model, &f, a, b).unwrap();
                    assert!((d[k] - fd).norm() < 1e-7, "a={a} b={b} k={k}: {} vs {fd}", d[k]);
                }
            }
        }
    }

    #[test]
    fn derivative_coupling_antihermitian_and_degenerate_gate() {
        let mut model = standard();
        model.spins.jy = -0.7; // couples |ee> and |gg>
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let f = build_frame(&model, &r, None).unwrap();
            for a in 0..4 {
                assert!(nonadiabatic_coupling(&model, &f, a, a).unwrap().iter().all(|z| z.norm() == 0.0));
                for b in 0..4 {
                    let dab = nonadiabatic_coupling(&model, &f, a, b).unwrap();
                    let dba = nonadiabatic_coupling(&model, &f, b, a).unwrap();
                    for k in 0..2 {
                        assert!((dba[k] + dab[k].conj()).norm() < 1e-10);
                    }
                }
            }
        }
        // Degenerate pair with a nonvanishing coupling element.
        let frame = AdiabaticFrame {
            r: [0.0, 0.0],
            energies: [0.0, 0.0, 1.0, 2.0],
            vectors: {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let mut u = CMat4::identity();
                u[(0, 0)] = c(s, 0.0);
                u[(1, 0)] = c(s, 0.0);
                u[(0, 1)] = c(s, 0.0);
                u[(1, 1)] = c(-s, 0.0);
                u
            },
            gauge: GaugeTag::LargestComponent,
        };
        assert!(matches!(
            nonadiabatic_coupling(&standard(), &frame, 0, 1),
            Err(Error::DegeneratePair { .. })
        ));
    }

    #[test]
    fn eigen_residual_and_analytic_agreement_on_random_points() {
        let model = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let r = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let f = build_frame(&model, &r, None).unwrap();
            assert!(residual(&model, &f) < 1e-10);
            assert!(max_abs_diff(&(f.vectors.adjoint() * f.vectors), &CMat4::identity()) < 1e-10);
            let a = analytic_energies(&model, &r).unwrap();
            for i in 0..4 {
                assert!((a[i] - f.energies[i]).abs() < 1e-12);
            }
            assert!(f.energies.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn tracking_keeps_continuity_along_a_path() {
        let model = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut r = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let v = [1.3, -0.4];
        let mut prev = build_frame(&model, &r, None).unwrap();
        let mut labels = [0usize, 1, 2, 3];
        for _ in 0..2000 {
            r = [r[0] + v[0] * 0.01, r[1] + v[1] * 0.01];
            let next = build_frame(&model, &r, Some(&prev)).unwrap();
            for l in labels.iter_mut() {
                let new = next.track(*l);
                let mut ov = C64::new(0.0, 0.0);
                for i in 0..4 {
                    ov += prev.vectors[(i, *l)].conj() * next.vectors[(i, new)];
                }
                assert!(ov.re > 0.0 && ov.im.abs() < 1e-12);
                *l = new;
            }
            prev = next;
        }
    }

    #[test]
    fn crossing_keeps_ee_label() {
        // R1 + R2 changes sign: |ee> and |gg> swap sorted order but not identity.
        let model = standard();
        let mut prev = build_frame(&model, &[0.5, 0.5], None).unwrap();
        let mut ee = (0..4).find(|&a| prev.population(a, EE) == 1.0).unwrap();
        let start = ee;
        for step in 1..=100 {
            let s = 0.5 - 0.01 * step as f64;
            let next = build_frame(&model, &[s, s], Some(&prev)).unwrap();
            ee = next.track(ee);
            assert_eq!(next.population(ee, EE), 1.0);
            prev = next;
        }
        assert_ne!(ee, start);
    }

    #[test]
    fn gamma_split_examples() {
        let model = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let id = decay_operator(DecayLabel::IdentityUniform, 0.3).unwrap();
        let pe = decay_operator(DecayLabel::ProjectorEE, 0.1).unwrap();
        for _ in 0..200 {
            let r = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
            let f = build_frame(&model, &r, None).unwrap();
            let g = gamma_in_adiabatic(&id, &f);
            for a in 0..4 {
                assert!((g.diag[a] - 0.3).abs() < 1e-14);
            }
            assert!(g.offdiag.iter().all(|z| z.norm() < 1e-14));

            let g = gamma_in_adiabatic(&pe, &f);
            let ee = (0..4).find(|&a| f.population(a, EE) > 0.5).unwrap();
            for a in 0..4 {
                let expected = if a == ee { 0.1 } else { 0.0 };
                assert_eq!(g.diag[a], expected);
                assert_eq!(f.decay_diagonal(&pe, a), expected);
            }
            assert!(g.offdiag.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn gamma_random_hermitian() {
        let model = standard();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let mut m = CMat4::zeros();
            for i in 0..4 {
                m[(i, i)] = c(rng.random_range(-1.0..1.0), 0.0);
                for j in (i + 1)..4 {
                    let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
            let decay = DecaySpec::custom(m).unwrap();
            let r = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let f = build_frame(&model, &r, None).unwrap();
            let g = gamma_in_adiabatic(&decay, &f);
            assert!(max_abs_diff(&g.full, &g.full.adjoint()) < 1e-12);
            assert!(max_abs_diff(&g.full, &(f.vectors.adjoint() * m * f.vectors)) < 1e-12);
            let mut rebuilt = g.offdiag;
            for i in 0..4 {
                rebuilt[(i, i)] += c(g.diag[i], 0.0);
            }
            assert_eq!(rebuilt, g.full);
            for a in 0..4 {
                assert!((f.decay_diagonal(&decay, a) - g.diag[a]).abs() < 1e-13);
                for b in 0..4 {
                    assert_eq!(gamma_rate(&g, a, b), gamma_rate(&g, b, a));
                }
            }
        }
    }

    #[test]
    fn gamma_rate_examples() {
        let f = build_frame(&standard(), &[0.3, 0.9], None).unwrap();
        let g = gamma_in_adiabatic(&decay_operator(DecayLabel::IdentityUniform, 0.5).unwrap(), &f);
        for a in 0..4 {
            for b in 0..4 {
                assert!((gamma_rate(&g, a, b) - 1.0).abs() < 1e-14);
            }
        }
        let g = gamma_in_adiabatic(&decay_operator(DecayLabel::ProjectorEE, 0.1).unwrap(), &f);
        let ee = (0..4).find(|&a| f.population(a, EE) > 0.5).unwrap();
        let other = (ee + 1) % 4;
        let other2 = (ee + 2) % 4;
        assert!((gamma_rate(&g, ee, other) - 0.1).abs() < 1e-15);
        assert_eq!(gamma_rate(&g, other, other2), 0.0);
        assert!((gamma_rate(&g, ee, ee) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn transition_table_examples() {
        let model = standard();
        let f = build_frame(&model, &[0.4, -1.2], None).unwrap();
        let g = gamma_in_adiabatic(&decay_operator(DecayLabel::ProjectorEE, 0.1).unwrap(), &f);
        let still = PhasePoint::new(f.r, [0.0, 0.0]);
        let t = transition_amplitudes(&model, &f, &still, &g).unwrap();
        assert!(t.hop.iter().flatten().all(|z| z.norm() == 0.0));
        assert!(t.shift.iter().flatten().all(Option::is_none));

        let moving = PhasePoint::new(f.r, [1.5, 0.7]);
        let t = transition_amplitudes(&model, &f, &moving, &g).unwrap();
        for a in 0..4 {
            for ap in 0..4 {
                for b in 0..4 {
                    for bp in 0..4 {
                        assert_eq!(t.t_gamma(a, ap, b, bp), c(0.0, 0.0));
                    }
                }
            }
        }
        let ee = (0..4).find(|&a| f.population(a, EE) > 0.5).unwrap();
        for b in 0..4 {
            assert_eq!(t.hop[ee][b], c(0.0, 0.0));
        }
        let block: Vec<usize> = (0..4).filter(|&a| f.population(a, 1) + f.population(a, 2) > 0.5).collect();
        let (lo, hi) = (block[0], block[1]);
        assert!(t.hop[hi][lo].norm() > 0.0);
        let s = t.shift[hi][lo].unwrap();
        // S_ab . (P/M) recovers omega_ab.
        let proj: C64 = (0..2).map(|k| s[k] * moving.p[k]).sum();
        assert!((proj - c(bohr_frequency(&f, hi, lo), 0.0)).norm() < 1e-12);
    }
}
