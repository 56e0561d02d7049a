//! Scenario files: TOML with fixed sections, unknown keys rejected.

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    FpRun,
    ControlRun,
    SdeRun,
    QuantumRun,
    PathsRun,
    Decompose,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::FpRun => "fp-run",
            Kind::ControlRun => "control-run",
            Kind::SdeRun => "sde-run",
            Kind::QuantumRun => "quantum-run",
            Kind::PathsRun => "paths-run",
            Kind::Decompose => "decompose",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: ScenarioSection,
    pub model: Option<ModelSection>,
    pub initial: Option<InitialSection>,
    pub control: Option<ControlSection>,
    #[serde(default)]
    pub numerics: NumericsSection,
    pub polymer: Option<PolymerSection>,
    pub quantum: Option<QuantumSection>,
    pub paths: Option<PathsSection>,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: Option<String>,
    pub kind: Option<Kind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    /// `H = ½ xᵀQx` with `Q = coefficients`.
    Quadratic,
    /// `H = a Σ (x_i² − b²)²`.
    DoubleWell,
    Flat,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub hamiltonian: Potential,
    pub coefficients: Option<Vec<Vec<f64>>>,
    pub dim: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub kt: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub mean: Vec<f64>,
    pub variance: Option<f64>,
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    #[default]
    Modulated,
    Feedback,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub alpha: Option<f64>,
    pub alpha_table: Option<Table>,
    /// CSV file with `t,alpha` rows, relative to the config file.
    pub alpha_file: Option<String>,
    /// Open-loop control `u(x) = K x`.
    pub linear: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub mode: ControlMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// A scalar applied to every axis, or one value per axis.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> PerAxis<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            PerAxis::One(v) => vec![*v],
            PerAxis::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: PerAxis<f64>,
    pub hi: PerAxis<f64>,
    pub cells: PerAxis<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub grid: Option<GridSection>,
    pub dt: Option<f64>,
    pub t1: Option<f64>,
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub record_every: usize,
    pub escape_radius: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolymerSection {
    pub masses: Vec<f64>,
    pub stiffness: f64,
    pub gamma: f64,
    pub alpha_c: PerAxis<f64>,
    pub kt: f64,
    /// Averaging window for the kinetic temperature.
    pub window: [f64; 2],
}

/// Complex matrix entries as numbers or strings such as `"0.5-1i"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Text(String),
}

pub type MatrixEntries = Vec<Vec<Entry>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Depolarizing,
    Dephasing,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    pub hamiltonian: MatrixEntries,
    pub hbar: Option<f64>,
    pub perturbation: Option<MatrixEntries>,
    pub initial_bloch: Option<[f64; 3]>,
    pub initial_state: Option<MatrixEntries>,
    /// Second state of a closed run, evolved under `H + ΔH`.
    pub tilde_bloch: Option<[f64; 3]>,
    pub tilde_state: Option<MatrixEntries>,
    pub channel: Option<Channel>,
    pub gamma: Option<f64>,
    pub jumps: Option<Vec<MatrixEntries>>,
    /// Reference state of an open run is the Gibbs state at this β, else `I/n`.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub drift_grid: GridSection,
    /// Pool drift and density estimates over all recorded times.
    #[serde(default)]
    pub pooled: bool,
    pub t_index: Option<usize>,
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub directory: Option<String>,
    pub files: Option<Vec<String>>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}
