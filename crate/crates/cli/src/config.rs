//! Run configuration: TOML schema, presets and literal conversion.

use serde::Deserialize;
use weakval::{c, CMatrix, QOperator, QState};

use crate::error::CliError;

/// Complex literal `[re, im]`.
pub type Literal = [f64; 2];
pub type VectorLit = Vec<Literal>;
pub type MatrixLit = Vec<Vec<Literal>>;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    WeakValue,
    Abl,
    ProbeSweep,
    QubitProbe,
    CnotSweep,
    Protective,
    Decoherence,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::WeakValue => "weak-value",
            Scenario::Abl => "abl",
            Scenario::ProbeSweep => "probe-sweep",
            Scenario::QubitProbe => "qubit-probe",
            Scenario::CnotSweep => "cnot-sweep",
            Scenario::Protective => "protective",
            Scenario::Decoherence => "decoherence",
        }
    }

    pub fn sweep_parameters(self) -> &'static [&'static str] {
        match self {
            Scenario::WeakValue | Scenario::Abl => &["t"],
            Scenario::ProbeSweep | Scenario::QubitProbe | Scenario::Decoherence => &["g"],
            Scenario::CnotSweep => &["epsilon"],
            Scenario::Protective => &["coupling", "total_time", "n_steps"],
        }
    }
}

pub const PRESETS: [(&str, &str); 3] = [
    ("three-box", include_str!("../presets/three-box.toml")),
    ("spin-amplification", include_str!("../presets/spin-amplification.toml")),
    ("dephasing-env", include_str!("../presets/dephasing-env.toml")),
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub qubit: Option<QubitSpec>,
    #[serde(default)]
    pub cnot: Option<CnotSpec>,
    #[serde(default)]
    pub protective: Option<ProtectiveSpec>,
    #[serde(default)]
    pub environment: Option<EnvironmentSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub pre: Option<VectorLit>,
    #[serde(default)]
    pub post: Option<VectorLit>,
    #[serde(default)]
    pub observable: Option<MatrixLit>,
    #[serde(default)]
    pub projectors: Option<Vec<NamedMatrix>>,
    #[serde(default)]
    pub hamiltonian: Option<MatrixLit>,
    #[serde(default)]
    pub total_time: Option<f64>,
    /// Rescale `pre` and `post` to unit norm.
    #[serde(default)]
    pub normalize: bool,
    /// Draw `pre`, `post` and `observable` at random from the run seed.
    #[serde(default)]
    pub random: Option<RandomSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: MatrixLit,
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub dim: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub points: usize,
    pub width: f64,
    pub center: f64,
    /// Half-width of the window; defaults to `20·width`.
    pub half_window: Option<f64>,
    pub mass: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { points: 1024, width: 1.0, center: 0.0, half_window: None, mass: 1.0 }
    }
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub overlap_floor: f64,
    /// Bound on `|g·⟨A⟩|` for first-order decoherence shifts.
    pub weak_coupling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { overlap_floor: weakval::tol::OVERLAP_FLOOR, weak_coupling: weakval::decoherence::WEAK_COUPLING_LIMIT }
    }
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSpec {
    pub r_i: [f64; 3],
    pub r_f: [f64; 3],
    pub m: [f64; 3],
    pub v: [f64; 3],
    pub q: [f64; 3],
    /// Observable `n·σ`.
    pub n: [f64; 3],
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnotSpec {
    pub k: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtectiveModel {
    /// `ω/2 n(t)·σ` with `n` turning from `ẑ` to `x̂` over the run.
    Rotating,
    /// Constant `system.hamiltonian`.
    Static,
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtectiveSpec {
    pub model: ProtectiveModel,
    pub omega: f64,
    pub coupling: f64,
    pub total_time: f64,
    pub n_steps: usize,
    pub level: usize,
    pub min_gap: f64,
    pub min_steps: usize,
    pub quadrature_intervals: usize,
}

impl Default for ProtectiveSpec {
    fn default() -> Self {
        let base = weakval::probe::ProtectiveConfig::default();
        Self {
            model: ProtectiveModel::Rotating,
            omega: 2.0,
            coupling: 0.01,
            total_time: 200.0,
            n_steps: base.n_steps,
            level: base.level,
            min_gap: base.min_gap,
            min_steps: base.min_steps,
            quadrature_intervals: 2000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub h0: MatrixLit,
    pub h1: MatrixLit,
    pub e_i: VectorLit,
    pub e_f: VectorLit,
    /// Orthonormal environment basis; computational basis when absent.
    #[serde(default)]
    pub e_basis: Option<Vec<VectorLit>>,
    pub times: [f64; 3],
    #[serde(default = "default_slices")]
    pub slices: usize,
    /// Trace the environment out instead of post-selecting `e_f`.
    #[serde(default)]
    pub traced: bool,
}

fn default_slices() -> usize {
    weakval::decoherence::DEFAULT_SLICES
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a config, layering it over its preset when one is named, and
/// validates everything that does not need the numerical library.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let user: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut table = match user.get("preset") {
        Some(toml::Value::String(name)) => {
            let src = preset_source(name).ok_or_else(|| {
                let known: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
                CliError::Config(format!("unknown preset `{name}`, expected one of {}", known.join(", ")))
            })?;
            toml::from_str::<toml::Table>(src).expect("bundled presets parse")
        }
        Some(_) => return Err(CliError::Config("`preset` must be a string".into())),
        None => toml::Table::new(),
    };
    merge(&mut table, user);
    let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let allowed = cfg.scenario.sweep_parameters();
    if !allowed.contains(&cfg.sweep.parameter.as_str()) {
        return Err(CliError::Config(format!(
            "scenario {} sweeps {}, not `{}`",
            cfg.scenario.name(),
            allowed.join(" or "),
            cfg.sweep.parameter
        )));
    }
    if cfg.sweep.values.is_empty() {
        return Err(CliError::Config("sweep.values must not be empty".into()));
    }
    if cfg.sweep.values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config("sweep.values must be finite".into()));
    }
    if matches!(cfg.scenario, Scenario::ProbeSweep) && cfg.sweep.values.contains(&0.0) {
        return Err(CliError::Config("probe-sweep reports Δ[Q]/g and needs g ≠ 0".into()));
    }
    if cfg.sweep.parameter == "n_steps" && cfg.sweep.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
        return Err(CliError::Config("n_steps values must be positive integers".into()));
    }
    let need = |present: bool, what: &str| {
        if present {
            Ok(())
        } else {
            Err(CliError::Config(format!("scenario {} needs {what}", cfg.scenario.name())))
        }
    };
    let system = cfg.system.as_ref();
    let has_states = system.is_some_and(|s| s.random.is_some() || (s.pre.is_some() && s.post.is_some()));
    let has_observable = system.is_some_and(|s| s.random.is_some() || s.observable.is_some());
    match cfg.scenario {
        Scenario::WeakValue | Scenario::ProbeSweep => {
            need(has_states, "system.pre and system.post")?;
            need(has_observable, "system.observable")?;
        }
        Scenario::Abl => {
            need(has_states, "system.pre and system.post")?;
            need(has_observable || system.is_some_and(|s| s.projectors.is_some()), "system.observable or system.projectors")?;
        }
        Scenario::QubitProbe => need(cfg.qubit.is_some(), "a [qubit] table")?,
        Scenario::CnotSweep => {
            need(has_states, "system.pre and system.post")?;
            need(cfg.cnot.is_some(), "a [cnot] table")?;
        }
        Scenario::Protective => {
            let model = cfg.protective.unwrap_or_default().model;
            if model == ProtectiveModel::Static {
                need(system.is_some_and(|s| s.hamiltonian.is_some()), "system.hamiltonian for the static model")?;
            }
        }
        Scenario::Decoherence => {
            need(has_states, "system.pre and system.post")?;
            need(has_observable, "system.observable")?;
            need(cfg.environment.is_some(), "an [environment] table")?;
        }
    }
    Ok(())
}

pub fn vector(lit: &[Literal]) -> weakval::CVector {
    weakval::CVector::from_iterator(lit.len(), lit.iter().map(|[re, im]| c(*re, *im)))
}

pub fn state(lit: &[Literal], normalize: bool, what: &str) -> Result<QState, CliError> {
    if lit.is_empty() {
        return Err(CliError::Config(format!("{what} is empty")));
    }
    let v = vector(lit);
    Ok(if normalize { QState::normalize_vector(v)? } else { QState::from_vector(v)? })
}

pub fn matrix(lit: &MatrixLit, what: &str) -> Result<CMatrix, CliError> {
    let n = lit.len();
    if n == 0 || lit.iter().any(|row| row.len() != n) {
        return Err(CliError::Config(format!("{what} must be a non-empty square matrix of [re, im] pairs")));
    }
    Ok(CMatrix::from_fn(n, n, |r, col| c(lit[r][col][0], lit[r][col][1])))
}

pub fn hermitian(lit: &MatrixLit, what: &str) -> Result<QOperator, CliError> {
    Ok(QOperator::hermitian(matrix(lit, what)?)?)
}
