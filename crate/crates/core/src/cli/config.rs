//! `key=value` run configuration files.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::model::{decay_operator, BathParams, DecayLabel, DecaySpec, InitialState, Mode, Model, SimConfig, SpinChainParams};

const KEYS: [&str; 16] = [
    "jx", "jy", "jz", "c", "mass", "omega", "beta", "gamma_kind", "gamma", "dt", "steps", "samples", "seed",
    "mode", "initial_state", "output_stride",
];

const MANDATORY: [&str; 9] = ["jx", "jy", "jz", "c", "beta", "gamma_kind", "gamma", "steps", "initial_state"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub decay: DecaySpec,
    pub sim: SimConfig,
}

impl RunConfig {
    /// Model parameters, `dt = 0.01`, 1000 steps, 50000 samples.
    pub fn standard(label: DecayLabel, gamma: f64, initial_state: InitialState) -> Result<Self> {
        Ok(Self {
            model: Model::standard(),
            decay: decay_operator(label, gamma)?,
            sim: SimConfig { initial_state, ..SimConfig::default() },
        })
    }
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    if !path.exists() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut values: HashMap<&str, (usize, &str)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key '{key}'")));
        }
        if values.insert(key, (line_no, value.trim())).is_some() {
            return Err(err(format!("duplicate key '{key}'")));
        }
    }
    if let Some(missing) = MANDATORY.iter().find(|k| !values.contains_key(*k)) {
        return Err(Error::Config(format!("missing mandatory key '{missing}'")));
    }

    let number = |key: &str, default: f64| -> Result<f64> {
        match values.get(key) {
            None => Ok(default),
            Some(&(line, v)) => v.parse().map_err(|_| Error::Parse { line, message: format!("{key}: invalid number '{v}'") }),
        }
    };
    let integer = |key: &str, default: u64| -> Result<u64> {
        match values.get(key) {
            None => Ok(default),
            Some(&(line, v)) => v.parse().map_err(|_| Error::Parse { line, message: format!("{key}: invalid integer '{v}'") }),
        }
    };
    let enum_err = |key: &str, v: &str| {
        let line = values[key].0;
        Error::Parse { line, message: format!("{key}: invalid value '{v}'") }
    };

    let spins = SpinChainParams { jx: number("jx", 0.0)?, jy: number("jy", 0.0)?, jz: number("jz", 0.0)? };
    let bath = BathParams {
        mass: number("mass", 1.0)?,
        omega: number("omega", 1.0)?,
        coupling: number("c", 0.0)?,
        beta: number("beta", 0.0)?,
    };
    bath.validate()?;

    let kind = values["gamma_kind"].1;
    let label = match kind {
        "identity" => DecayLabel::IdentityUniform,
        "projector_ee" => DecayLabel::ProjectorEE,
        other => return Err(enum_err("gamma_kind", other)),
    };
    let decay = decay_operator(label, number("gamma", 0.0)?)?;

    let mode = match values.get("mode").map_or("adiabatic", |v| v.1) {
        "adiabatic" => Mode::Adiabatic,
        "nonadiabatic" => Mode::Nonadiabatic,
        other => return Err(enum_err("mode", other)),
    };
    let state = values["initial_state"].1;
    let initial_state = parse_initial_state(state).ok_or_else(|| enum_err("initial_state", state))?;

    let defaults = SimConfig::default();
    let sim = SimConfig {
        dt: number("dt", defaults.dt)?,
        n_steps: integer("steps", 0)? as usize,
        n_samples: integer("samples", defaults.n_samples as u64)? as usize,
        seed: integer("seed", defaults.seed)?,
        mode,
        initial_state,
        output_stride: integer("output_stride", defaults.output_stride as u64)? as usize,
    };
    sim.validate()?;
    Ok(RunConfig { model: Model { spins, bath }, decay, sim })
}

/// `phi`, `psi`, or `custom:` followed by eight numbers (re, im per component).
fn parse_initial_state(s: &str) -> Option<InitialState> {
    match s {
        "phi" => Some(InitialState::Phi),
        "psi" => Some(InitialState::Psi),
        _ => {
            let nums: Vec<f64> = s
                .strip_prefix("custom:")?
                .split(|ch: char| ch.is_whitespace() || ch == ',')
                .filter(|t| !t.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .ok()?;
            if nums.len() != 8 {
                return None;
            }
            let ket: [C64; 4] = std::array::from_fn(|i| c(nums[2 * i], nums[2 * i + 1]));
            Some(InitialState::CustomKet(ket))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DecayKind;

    const STANDARD: &str = "\
# two-spin chain
jx=-1
jy=-1
jz=0.5
c=0.24
beta=0.1
gamma_kind=identity
gamma=0.5
steps=1000
initial_state=phi
";

    #[test]
    fn standard_defaults() {
        let cfg = parse_config(STANDARD).unwrap();
        assert_eq!(cfg.model, Model::standard());
        assert_eq!(cfg.sim.dt, 0.01);
        assert_eq!(cfg.sim.n_samples, 50_000);
        assert_eq!(cfg.sim.mode, Mode::Adiabatic);
        assert_eq!(cfg, RunConfig::standard(DecayLabel::IdentityUniform, 0.5, InitialState::Phi).unwrap());
    }

    #[test]
    fn projector_configuration() {
        let text = STANDARD
            .replace("gamma_kind=identity", "gamma_kind=projector_ee")
            .replace("gamma=0.5", "gamma=0.01")
            .replace("initial_state=phi", "initial_state=psi");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.decay.kind, DecayKind::ProjectorEE(0.01));
        assert_eq!(cfg.sim.initial_state, InitialState::Psi);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_config(&format!("{STANDARD}dt=0\n")), Err(Error::Config(_))));
        assert!(matches!(parse_config(&format!("{STANDARD}color=red\n")), Err(Error::Parse { line: 11, .. })));
        assert!(matches!(parse_config(&format!("{STANDARD}mode=fast\n")), Err(Error::Parse { line: 11, .. })));
        assert!(matches!(parse_config(&format!("{STANDARD}samples=many\n")), Err(Error::Parse { line: 11, .. })));
        assert!(matches!(parse_config(&format!("{STANDARD}jx=2\n")), Err(Error::Parse { line: 11, .. })));
        assert!(matches!(parse_config(&format!("{STANDARD}oops\n")), Err(Error::Parse { line: 11, .. })));
        assert!(matches!(parse_config(&STANDARD.replace("beta=0.1\n", "")), Err(Error::Config(_))));
        assert!(matches!(parse_config(&STANDARD.replace("gamma=0.5", "gamma=-1")), Err(Error::Config(_))));
        assert!(parse_config(&STANDARD.replace("initial_state=phi", "initial_state=custom:1 0 0")).is_err());
    }

    #[test]
    fn custom_ket_and_comments() {
        let text = STANDARD.replace("initial_state=phi", "initial_state=custom:0 0 0 1 0 0 0 0  # i|eg>");
        let cfg = parse_config(&text).unwrap();
        let ket = cfg.sim.initial_state.ket();
        assert_eq!(ket[1], c(0.0, 1.0));
        let round = parse_initial_state(&cfg.sim.initial_state.to_string()).unwrap();
        assert_eq!(round, cfg.sim.initial_state);
        let unnormalized = STANDARD.replace("initial_state=phi", "initial_state=custom:1 0 1 0 0 0 0 0");
        assert!(matches!(parse_config(&unnormalized), Err(Error::Config(_))));
    }
}
