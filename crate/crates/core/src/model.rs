//! Two-spin chain coupled to two harmonic oscillators.
//!
//! Everything is adimensional: energies in units of the oscillator quantum,
//! time in inverse oscillator frequency, and the reduced Planck constant is 1.
//! The subsystem basis is fixed throughout the crate as
//! `|1> = |ee>`, `|2> = |eg>`, `|3> = |ge>`, `|4> = |gg>` (zero-based 0..3).

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, hermiticity_defect, real_diag, CMat4, C64};

/// Number of bath oscillators (one per spin).
pub const N_OSC: usize = 2;

/// Hermiticity tolerance for decay operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Diagonal of `sigma_z` acting on spin `k` in the `|ee>,|eg>,|ge>,|gg>` basis.
pub const SIGMA_Z: [[f64; 4]; N_OSC] = [[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]];

/// Index of `|ee>` in the subsystem basis.
pub const EE: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinChainParams {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl SpinChainParams {
    /// `jx = jy = -1`, `jz = 0.5`.
    pub fn standard() -> Self {
        Self { jx: -1.0, jy: -1.0, jz: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathParams {
    pub mass: f64,
    pub omega: f64,
    /// Bilinear spin-oscillator coupling `c`.
    pub coupling: f64,
    /// Inverse temperature in units of the oscillator quantum.
    pub beta: f64,
}

impl BathParams {
    /// `M = omega = 1`, `c = 0.24`, `beta = 0.1`.
    pub fn standard() -> Self {
        Self { mass: 1.0, omega: 1.0, coupling: 0.24, beta: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("mass", self.mass)?;
        positive("omega", self.omega)?;
        positive("beta", self.beta)?;
        if !self.coupling.is_finite() {
            return Err(Error::Config("coupling must be finite".into()));
        }
        Ok(())
    }

    pub fn spring(&self) -> f64 {
        self.mass * self.omega * self.omega
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Model {
    pub spins: SpinChainParams,
    pub bath: BathParams,
}

impl Model {
    pub fn standard() -> Self {
        Self { spins: SpinChainParams::standard(), bath: BathParams::standard() }
    }

    /// Full adiabatic Hamiltonian `h_W(R) = H_S + H_SB(R) + V_B(R) I`.
    pub fn h_w(&self, r: &[f64; N_OSC]) -> CMat4 {
        let mut h = subsystem_hamiltonian(&self.spins);
        let shift = bath_potential(&self.bath, r);
        let diag = coupling_diagonal(&self.bath, r);
        for i in 0..4 {
            h[(i, i)] += c(diag[i] + shift, 0.0);
        }
        h
    }

    /// Diagonal of `dh_W/dR_k = -c sigma_z^(k) + M omega^2 R_k`.
    pub fn h_w_gradient(&self, r: &[f64; N_OSC], k: usize) -> [f64; 4] {
        let harmonic = self.bath.spring() * r[k];
        std::array::from_fn(|i| -self.bath.coupling * SIGMA_Z[k][i] + harmonic)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhasePoint {
    pub r: [f64; N_OSC],
    pub p: [f64; N_OSC],
}

impl PhasePoint {
    pub fn new(r: [f64; N_OSC], p: [f64; N_OSC]) -> Self {
        Self { r, p }
    }

    pub fn is_finite(&self) -> bool {
        self.r.iter().chain(&self.p).all(|x| x.is_finite())
    }

    pub fn kinetic(&self, mass: f64) -> f64 {
        self.p.iter().map(|p| p * p).sum::<f64>() / (2.0 * mass)
    }
}

/// `H_S = -jx sx sx - jy sy sy - jz sz sz`.
pub fn subsystem_hamiltonian(sp: &SpinChainParams) -> CMat4 {
    let mut h = real_diag([-sp.jz, sp.jz, sp.jz, -sp.jz]);
    // sx sx + sy sy flips |eg> <-> |ge>; sx sx - sy sy flips |ee> <-> |gg>.
    let flip = -(sp.jx + sp.jy);
    let pair = -(sp.jx - sp.jy);
    h[(1, 2)] = c(flip, 0.0);
    h[(2, 1)] = c(flip, 0.0);
    h[(0, 3)] = c(pair, 0.0);
    h[(3, 0)] = c(pair, 0.0);
    h
}

fn coupling_diagonal(bp: &BathParams, r: &[f64; N_OSC]) -> [f64; 4] {
    std::array::from_fn(|i| -bp.coupling * (r[0] * SIGMA_Z[0][i] + r[1] * SIGMA_Z[1][i]))
}

/// `H_SB = -c (R1 sz^(1) + R2 sz^(2))`, diagonal in the subsystem basis.
pub fn coupling_hamiltonian(bp: &BathParams, r: &[f64]) -> Result<CMat4> {
    let r: &[f64; N_OSC] =
        r.try_into().map_err(|_| Error::Dimension { expected: N_OSC, got: r.len() })?;
    Ok(real_diag(coupling_diagonal(bp, r)))
}

/// Harmonic bath potential `sum_k M omega^2 R_k^2 / 2`.
pub fn bath_potential(bp: &BathParams, r: &[f64]) -> f64 {
    0.5 * bp.spring() * r.iter().map(|x| x * x).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayLabel {
    /// `gamma * I`
    IdentityUniform,
    /// `gamma * |ee><ee|`
    ProjectorEE,
}

impl fmt::Display for DecayLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayLabel::IdentityUniform => f.write_str("identity"),
            DecayLabel::ProjectorEE => f.write_str("projector_ee"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayKind {
    IdentityUniform(f64),
    ProjectorEE(f64),
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecaySpec {
    pub matrix: CMat4,
    pub kind: DecayKind,
}

/// Builds one of the two model decay operators.
pub fn decay_operator(label: DecayLabel, gamma: f64) -> Result<DecaySpec> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Config(format!("decay rate must be finite and >= 0, got {gamma}")));
    }
    Ok(match label {
        DecayLabel::IdentityUniform => DecaySpec {
            matrix: real_diag([gamma; 4]),
            kind: DecayKind::IdentityUniform(gamma),
        },
        DecayLabel::ProjectorEE => DecaySpec {
            matrix: real_diag([gamma, 0.0, 0.0, 0.0]),
            kind: DecayKind::ProjectorEE(gamma),
        },
    })
}

impl DecaySpec {
    /// Accepts any Hermitian matrix; positivity is not required.
    pub fn custom(matrix: CMat4) -> Result<Self> {
        let deviation = hermiticity_defect(&matrix);
        if !deviation.is_finite() || deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitian { deviation });
        }
        Ok(Self { matrix, kind: DecayKind::Custom })
    }

    pub fn zero() -> Self {
        Self { matrix: CMat4::zeros(), kind: DecayKind::IdentityUniform(0.0) }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match hermitian_eigen(&self.matrix) {
            Ok((e, _)) => e.into_iter().fold(f64::INFINITY, f64::min),
            Err(_) => f64::NAN,
        }
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.min_eigenvalue() >= -HERMITIAN_TOL
    }

    pub fn describe(&self) -> String {
        match self.kind {
            DecayKind::IdentityUniform(g) => format!("identity({g})"),
            DecayKind::ProjectorEE(g) => format!("projector_ee({g})"),
            DecayKind::Custom => "custom".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Adiabatic,
    Nonadiabatic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Adiabatic => f.write_str("adiabatic"),
            Mode::Nonadiabatic => f.write_str("nonadiabatic"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    /// `|eg>`
    Phi,
    /// `(|ee> - |eg>) / sqrt(2)`
    Psi,
    CustomKet([C64; 4]),
}

impl InitialState {
    pub fn ket(&self) -> [C64; 4] {
        let zero = c(0.0, 0.0);
        match *self {
            InitialState::Phi => [zero, c(1.0, 0.0), zero, zero],
            InitialState::Psi => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                [c(h, 0.0), c(-h, 0.0), zero, zero]
            }
            InitialState::CustomKet(k) => k,
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Phi => f.write_str("phi"),
            InitialState::Psi => f.write_str("psi"),
            InitialState::CustomKet(k) => {
                f.write_str("custom:")?;
                let parts: Vec<String> =
                    k.iter().map(|z| format!("{:.17e} {:.17e}", z.re, z.im)).collect();
                f.write_str(&parts.join(" "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub mode: Mode,
    pub initial_state: InitialState,
    pub output_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            n_steps: 1000,
            n_samples: 50_000,
            seed: 0,
            mode: Mode::Adiabatic,
            initial_state: InitialState::Phi,
            output_stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be >= 1".into()));
        }
        if let InitialState::CustomKet(k) = self.initial_state {
            let norm: f64 = k.iter().map(|z| z.norm_sqr()).sum();
            if !((norm - 1.0).abs() <= 1e-12) {
                return Err(Error::Config(format!("custom ket has squared norm {norm}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use nalgebra::Matrix2;
    use proptest::prelude::*;

    type C2 = Matrix2<C64>;

    fn kron(a: &C2, b: &C2) -> CMat4 {
        let mut out = CMat4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Pauli matrices in the (|e>, |g>) single-spin basis with sz|e> = +|e>.
    fn paulis() -> [C2; 3] {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        [
            C2::new(z, one, one, z),
            C2::new(z, -i, i, z),
            C2::new(one, z, z, -one),
        ]
    }

    fn brute_force_hs(sp: &SpinChainParams) -> CMat4 {
        let [sx, sy, sz] = paulis();
        -kron(&sx, &sx) * c(sp.jx, 0.0) - kron(&sy, &sy) * c(sp.jy, 0.0) - kron(&sz, &sz) * c(sp.jz, 0.0)
    }

    #[test]
    fn standard_subsystem_hamiltonian() {
        let h = subsystem_hamiltonian(&SpinChainParams::standard());
        let expected_diag = [-0.5, 0.5, 0.5, -0.5];
        for i in 0..4 {
            assert_eq!(h[(i, i)], c(expected_diag[i], 0.0));
        }
        assert_eq!(h[(1, 2)], c(2.0, 0.0));
        assert_eq!(h[(2, 1)], c(2.0, 0.0));
        assert_eq!(h[(0, 3)], c(0.0, 0.0));
        assert!(max_abs_diff(&h, &brute_force_hs(&SpinChainParams::standard())) < 1e-15);
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let h = subsystem_hamiltonian(&SpinChainParams { jx: 0.0, jy: 0.0, jz: 0.0 });
        assert_eq!(h, CMat4::zeros());
    }

    #[test]
    fn anisotropic_xy_couples_ee_and_gg() {
        let sp = SpinChainParams { jx: 1.0, jy: -1.0, jz: 0.0 };
        let h = subsystem_hamiltonian(&sp);
        assert_eq!(h[(0, 3)], c(-2.0, 0.0));
        assert_eq!(h[(1, 2)], c(0.0, 0.0));
        assert!(max_abs_diff(&h, &brute_force_hs(&sp)) < 1e-15);
    }

    proptest! {
        #[test]
        fn subsystem_hamiltonian_matches_kronecker(jx in -5.0..5.0f64, jy in -5.0..5.0f64, jz in -5.0..5.0f64) {
            let sp = SpinChainParams { jx, jy, jz };
            let h = subsystem_hamiltonian(&sp);
            prop_assert!(max_abs_diff(&h, &brute_force_hs(&sp)) < 1e-12);
            prop_assert!(hermiticity_defect(&h) == 0.0);
        }

        #[test]
        fn coupling_is_diagonal_and_traceless(cp in -3.0..3.0f64, r1 in -10.0..10.0f64, r2 in -10.0..10.0f64) {
            let bp = BathParams { coupling: cp, ..BathParams::standard() };
            let h = coupling_hamiltonian(&bp, &[r1, r2]).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    if i != j { prop_assert_eq!(h[(i, j)], c(0.0, 0.0)); }
                }
            }
            prop_assert!(crate::linalg::trace(&h).norm() < 1e-12);
        }
    }

    #[test]
    fn coupling_examples() {
        let bp = BathParams { coupling: 0.24, ..BathParams::standard() };
        let h = coupling_hamiltonian(&bp, &[1.0, 0.0]).unwrap();
        assert!(max_abs_diff(&h, &real_diag([-0.24, -0.24, 0.24, 0.24])) < 1e-15);
        let h = coupling_hamiltonian(&bp, &[1.0, -1.0]).unwrap();
        assert!(max_abs_diff(&h, &real_diag([0.0, -0.48, 0.48, 0.0])) < 1e-15);
        let free = BathParams { coupling: 0.0, ..bp };
        assert_eq!(coupling_hamiltonian(&free, &[3.0, -7.0]).unwrap(), CMat4::zeros());
        assert!(matches!(
            coupling_hamiltonian(&bp, &[1.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn harmonic_potential() {
        let bp = BathParams::standard();
        assert_eq!(bath_potential(&bp, &[0.0, 0.0]), 0.0);
        assert_eq!(bath_potential(&bp, &[1.0, 0.0]), 0.5);
        assert_eq!(bath_potential(&bp, &[1.0, 2.0]), 2.5);
    }

    #[test]
    fn decay_operators() {
        let id = decay_operator(DecayLabel::IdentityUniform, 0.5).unwrap();
        assert_eq!(id.matrix, real_diag([0.5; 4]));
        let pe = decay_operator(DecayLabel::ProjectorEE, 0.1).unwrap();
        assert_eq!(pe.matrix, real_diag([0.1, 0.0, 0.0, 0.0]));
        for d in [id, pe] {
            assert_eq!(hermiticity_defect(&d.matrix), 0.0);
            assert!(d.is_positive_semidefinite());
        }
        assert!(decay_operator(DecayLabel::ProjectorEE, -0.1).is_err());
    }

    #[test]
    fn custom_decay_hermiticity_gate() {
        let mut m = real_diag([0.1, -0.2, 0.3, 0.0]);
        m[(0, 2)] = c(0.05, 0.02);
        m[(2, 0)] = c(0.05, -0.02);
        let d = DecaySpec::custom(m).unwrap();
        assert!(!d.is_positive_semidefinite());
        m[(2, 0)] = c(0.05, 0.02);
        assert!(matches!(DecaySpec::custom(m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(SimConfig { n_steps: 0, ..Default::default() }.validate().is_err());
        assert!(SimConfig { n_samples: 0, ..Default::default() }.validate().is_err());
        let bad = InitialState::CustomKet([c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(SimConfig { initial_state: bad, ..Default::default() }.validate().is_err());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let good = InitialState::CustomKet([c(h, 0.0), c(0.0, h), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(SimConfig { initial_state: good, ..Default::default() }.validate().is_ok());
    }
}
