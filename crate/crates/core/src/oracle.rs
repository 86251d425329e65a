//! Exact reference propagation for the decoupled subsystem:
//! `d rho/dt = -i[H, rho] - {Gamma, rho}` integrated with classical RK4.

use crate::linalg::{c, CMat4};

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub rho: CMat4,
    pub t: f64,
}

fn rhs(h: &CMat4, gamma: &CMat4, rho: &CMat4) -> CMat4 {
    let minus_i = c(0.0, -1.0);
    (h * rho - rho * h) * minus_i - (gamma * rho + rho * gamma)
}

pub fn rk4_step(state: &QuantumState, h: &CMat4, gamma: &CMat4, dt: f64) -> QuantumState {
    let half = c(0.5 * dt, 0.0);
    let full = c(dt, 0.0);
    let k1 = rhs(h, gamma, &state.rho);
    let k2 = rhs(h, gamma, &(state.rho + k1 * half));
    let k3 = rhs(h, gamma, &(state.rho + k2 * half));
    let k4 = rhs(h, gamma, &(state.rho + k3 * full));
    let rho = state.rho + (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0);
    QuantumState { rho, t: state.t + dt }
}

/// States at `t = 0, stride dt, 2 stride dt, ...` up to `n_steps dt`.
pub fn evolve(rho0: CMat4, h: &CMat4, gamma: &CMat4, dt: f64, n_steps: usize, stride: usize) -> Vec<QuantumState> {
    let mut state = QuantumState { rho: rho0, t: 0.0 };
    let mut out = vec![state.clone()];
    for step in 1..=n_steps {
        state = rk4_step(&state, h, gamma, dt);
        state.t = step as f64 * dt;
        if step % stride == 0 {
            out.push(state.clone());
        }
    }
    out
}

/// Trace under uniform decay `gamma * I` starting from unit trace.
pub fn trace_law_identity(gamma: f64, t: f64) -> f64 {
    (-2.0 * gamma * t).exp()
}

/// Trace under decay `gamma |ee><ee|` when the initial `|ee>` population is `p`
/// and `|ee>` is an eigenstate of the Hamiltonian.
pub fn trace_law_projector(gamma: f64, p: f64, t: f64) -> f64 {
    (1.0 - p) + p * (-2.0 * gamma * t).exp()
}
