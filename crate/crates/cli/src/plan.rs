//! Turns a parsed config into fully constructed, validated module inputs.
//! Everything that can be rejected before running is rejected here.

use std::path::Path;
use std::sync::Arc;

use entropy_lab::control::GainSchedule;
use entropy_lab::model::{gibbs_density, Axis, GaussianDensity, Grid, GridDensity, HamiltonianSpec};
use entropy_lab::quantum::{
    gibbs_state, io::parse_complex, CMatrix, DensityOperator, HamiltonianOperator, LindbladSpec, C64,
};
use entropy_lab::schedule::PiecewiseLinear;
use entropy_lab::sde::{ControlField, EnsembleConfig, InitialDistribution, PolymerSpec};
use nalgebra::{DMatrix, DVector};

use crate::config::*;
use crate::error::{CliError, FieldContext};

pub struct Plan {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub files: Vec<String>,
    pub body: Body,
}

pub enum Body {
    Grid(GridRun),
    Sde(SdeRun),
    Polymer(PolymerRun),
    Quantum(QuantumRun),
    Paths(PathsRun),
}

pub enum GridControl {
    None,
    Gain(GainSchedule, ControlMode),
    Linear(DMatrix<f64>),
}

pub struct GridRun {
    pub ham: HamiltonianSpec,
    pub rho0: GridDensity,
    pub equilibrium: GridDensity,
    pub control: GridControl,
    pub t1: f64,
    pub dt: f64,
    pub record_every: usize,
}

pub struct SdeRun {
    pub ham: HamiltonianSpec,
    pub x0: InitialDistribution,
    pub control: Option<ControlField>,
    pub cfg: EnsembleConfig,
}

pub struct PolymerRun {
    pub specs: Vec<PolymerSpec>,
    pub cfg: EnsembleConfig,
    pub window: (f64, f64),
}

pub enum QuantumRun {
    Closed {
        h: HamiltonianOperator,
        delta_h: HamiltonianOperator,
        rho0: DensityOperator,
        tilde0: DensityOperator,
        times: Vec<f64>,
    },
    Open {
        /// Generator with the perturbation already added to its hamiltonian.
        spec: LindbladSpec,
        /// Unperturbed generator, the one `reference` is stationary for.
        base: LindbladSpec,
        delta_h: Option<HamiltonianOperator>,
        rho0: DensityOperator,
        reference: DensityOperator,
        t1: f64,
        dt: f64,
        record_every: usize,
    },
}

pub struct PathsRun {
    pub sde: SdeRun,
    pub drift_grid: Grid,
    pub density_grid: Grid,
    pub pooled: bool,
    pub t_index: usize,
    pub bandwidth: Option<f64>,
}

/// CSV outputs a scenario kind can write, and the ones written by default.
/// `results.json` and the manifest are always written.
pub fn output_names(kind: Kind, polymer: bool) -> (&'static [&'static str], &'static [&'static str]) {
    match kind {
        Kind::FpRun | Kind::ControlRun => (&["trajectory", "summary", "divergence"], &["summary", "divergence"]),
        Kind::Decompose => (&["trajectory", "summary", "decomposition"], &["summary", "decomposition"]),
        Kind::SdeRun if polymer => (&["ensemble", "summary", "temperature"], &["temperature"]),
        Kind::SdeRun => (&["ensemble", "summary"], &["summary"]),
        Kind::QuantumRun => (&["quantum"], &["quantum"]),
        Kind::PathsRun => (&["ensemble", "drifts"], &["drifts"]),
    }
}

fn positive(field: &str, v: Option<f64>) -> Result<f64, CliError> {
    match v {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(CliError::config(field, format!("must be positive, got {v}"))),
        None => Err(CliError::config(field, "missing")),
    }
}

fn require<'a, T>(field: &str, v: &'a Option<T>) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::config(field, "missing"))
}

fn unused<T>(field: &str, v: &Option<T>, kind: Kind) -> Result<(), CliError> {
    match v {
        Some(_) => Err(CliError::config(field, format!("not used by {}", kind.name()))),
        None => Ok(()),
    }
}

fn real_matrix(field: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(field, format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn complex_matrix(field: &str, rows: &MatrixEntries) -> Result<CMatrix, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::config(field, "expected a nonempty square matrix"));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = match e {
                Entry::Real(x) => C64::new(*x, 0.0),
                Entry::Text(s) => parse_complex(s).field(&format!("{field}[{i}][{j}]"))?,
            };
        }
    }
    Ok(m)
}

fn hamiltonian(model: &ModelSection) -> Result<HamiltonianSpec, CliError> {
    let (kt, s2) = (model.kt, model.sigma2);
    let ham = match model.hamiltonian {
        Potential::Quadratic => {
            let rows = require("model.coefficients", &model.coefficients)?;
            let q = real_matrix("model.coefficients", rows, rows.len())?;
            HamiltonianSpec::quadratic(q, kt, s2)
        }
        Potential::DoubleWell => {
            let a = *require("model.a", &model.a)?;
            let b = *require("model.b", &model.b)?;
            HamiltonianSpec::double_well(model.dim.unwrap_or(1), a, b, kt, s2)
        }
        Potential::Flat => HamiltonianSpec::constant(model.dim.unwrap_or(1), 0.0, kt, s2),
    };
    ham.field("model")
}

fn broadcast<T: Copy>(field: &str, v: &PerAxis<T>, n: usize) -> Result<Vec<T>, CliError> {
    match v.values() {
        one if one.len() == 1 => Ok(vec![one[0]; n]),
        many if many.len() == n => Ok(many),
        other => Err(CliError::config(field, format!("{} values for {n} axes", other.len()))),
    }
}

fn grid(field: &str, section: &GridSection, n: usize) -> Result<Grid, CliError> {
    let lo = broadcast(&format!("{field}.lo"), &section.lo, n)?;
    let hi = broadcast(&format!("{field}.hi"), &section.hi, n)?;
    let cells = broadcast(&format!("{field}.cells"), &section.cells, n)?;
    let axes = (0..n).map(|d| Axis::new(lo[d], hi[d], cells[d])).collect();
    Grid::new(axes).field(field)
}

fn initial_moments(init: &InitialSection, n: usize) -> Result<(DVector<f64>, DMatrix<f64>), CliError> {
    if init.mean.len() != n {
        return Err(CliError::config("initial.mean", format!("expected {n} components")));
    }
    let cov = match (&init.variance, &init.covariance) {
        (Some(v), None) => DMatrix::identity(n, n) * *v,
        (None, Some(rows)) => real_matrix("initial.covariance", rows, n)?,
        _ => return Err(CliError::config("initial", "give exactly one of variance, covariance")),
    };
    Ok((DVector::from_column_slice(&init.mean), cov))
}

fn gain_schedule(control: &ControlSection, base: &Path) -> Result<Option<GainSchedule>, CliError> {
    let given = [control.alpha.is_some(), control.alpha_table.is_some(), control.alpha_file.is_some()];
    match given.iter().filter(|g| **g).count() {
        0 => return Ok(None),
        1 => {}
        _ => return Err(CliError::config("control", "give only one of alpha, alpha_table, alpha_file")),
    }
    if let Some(a) = control.alpha {
        return Ok(Some(GainSchedule::constant(a)));
    }
    if let Some(t) = &control.alpha_table {
        let table = PiecewiseLinear::new(t.times.clone(), t.values.clone()).field("control.alpha_table")?;
        return Ok(Some(GainSchedule::table(table)));
    }
    let file = control.alpha_file.as_ref().expect("counted above");
    let path = base.join(file);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::config("control.alpha_file", format!("{}: {e}", path.display())))?;
    let table = PiecewiseLinear::from_csv(&text).field("control.alpha_file")?;
    Ok(Some(GainSchedule::table(table)))
}

fn linear_control(control: &ControlSection, n: usize) -> Result<Option<DMatrix<f64>>, CliError> {
    control.linear.as_ref().map(|rows| real_matrix("control.linear", rows, n)).transpose()
}

/// `base` resolves relative paths inside the config.
pub fn build(cfg: &ScenarioConfig, kind: Kind, base: &Path) -> Result<Plan, CliError> {
    let name = cfg.scenario.name.clone().unwrap_or_else(|| kind.name().to_string());
    let seed = cfg.numerics.seed;
    let polymer = cfg.polymer.is_some();
    let (allowed, default) = output_names(kind, polymer);
    let files = match &cfg.outputs.files {
        Some(list) => {
            if let Some(bad) = list.iter().find(|f| !allowed.contains(&f.as_str())) {
                return Err(CliError::config("outputs.files", format!("unknown output {bad:?} for {}; expected one of {allowed:?}", kind.name())));
            }
            list.clone()
        }
        None => default.iter().map(|s| s.to_string()).collect(),
    };
    if cfg.numerics.record_every == 0 {
        return Err(CliError::config("numerics.record_every", "must be at least 1"));
    }
    let body = match kind {
        Kind::FpRun | Kind::ControlRun | Kind::Decompose => Body::Grid(grid_run(cfg, kind, base)?),
        Kind::SdeRun if polymer => Body::Polymer(polymer_run(cfg)?),
        Kind::SdeRun => Body::Sde(sde_run(cfg, kind)?),
        Kind::QuantumRun => Body::Quantum(quantum_run(cfg)?),
        Kind::PathsRun => Body::Paths(paths_run(cfg)?),
    };
    for (field, present) in [
        ("polymer", polymer && kind != Kind::SdeRun),
        ("quantum", cfg.quantum.is_some() && kind != Kind::QuantumRun),
        ("paths", cfg.paths.is_some() && kind != Kind::PathsRun),
    ] {
        if present {
            return Err(CliError::config(field, format!("not used by {}", kind.name())));
        }
    }
    Ok(Plan { name, kind, seed, files, body })
}

fn grid_run(cfg: &ScenarioConfig, kind: Kind, base: &Path) -> Result<GridRun, CliError> {
    let ham = hamiltonian(require("model", &cfg.model)?)?;
    let n = ham.dim();
    let g = grid("numerics.grid", require("numerics.grid", &cfg.numerics.grid)?, n)?;
    let (mean, cov) = initial_moments(require("initial", &cfg.initial)?, n)?;
    let rho0 = GaussianDensity::new(mean, cov).and_then(|d| d.on_grid(&g)).field("initial")?;
    let equilibrium = gibbs_density(&ham, &g).field("model")?.value;
    let dt = positive("numerics.dt", cfg.numerics.dt)?;
    let t1 = positive("numerics.t1", cfg.numerics.t1)?;
    unused("numerics.n", &cfg.numerics.n, kind)?;
    let control = match (&cfg.control, kind) {
        (None, Kind::ControlRun) => return Err(CliError::config("control", "missing")),
        (None, _) => GridControl::None,
        (Some(_), Kind::FpRun) => return Err(CliError::config("control", "not used by fp-run; use control-run")),
        (Some(c), _) => match (gain_schedule(c, base)?, linear_control(c, n)?) {
            (Some(alpha), None) => {
                alpha.validate(ham.sigma2(), 0.0, t1, dt).field("control.alpha")?;
                GridControl::Gain(alpha, c.mode)
            }
            (None, Some(k)) if c.mode == ControlMode::Modulated => GridControl::Linear(k),
            (None, Some(_)) => return Err(CliError::config("control.mode", "feedback needs a gain, not a linear control")),
            (None, None) => return Err(CliError::config("control", "give a gain (alpha, alpha_table, alpha_file) or linear")),
            (Some(_), Some(_)) => return Err(CliError::config("control", "a gain and a linear control are exclusive")),
        },
    };
    Ok(GridRun { ham, rho0, equilibrium, control, t1, dt, record_every: cfg.numerics.record_every })
}

fn ensemble_config(cfg: &ScenarioConfig) -> Result<EnsembleConfig, CliError> {
    let nu = &cfg.numerics;
    let n = *require("numerics.n", &nu.n)?;
    let dt = positive("numerics.dt", nu.dt)?;
    let t1 = positive("numerics.t1", nu.t1)?;
    let mut ec = EnsembleConfig::new(n, dt, t1, nu.seed).record_every(nu.record_every);
    if let Some(r) = nu.escape_radius {
        ec = ec.escape_radius(positive("numerics.escape_radius", Some(r))?);
    }
    Ok(ec)
}

fn sde_run(cfg: &ScenarioConfig, kind: Kind) -> Result<SdeRun, CliError> {
    let mut ham = hamiltonian(require("model", &cfg.model)?)?;
    let n = ham.dim();
    let (mean, cov) = initial_moments(require("initial", &cfg.initial)?, n)?;
    let x0 = InitialDistribution::gaussian(mean, cov).field("initial.covariance")?;
    if kind == Kind::SdeRun {
        unused("numerics.grid", &cfg.numerics.grid, kind)?;
    }
    let ecfg = ensemble_config(cfg)?;
    let mut control = None;
    if let Some(c) = &cfg.control {
        if c.mode == ControlMode::Feedback || c.alpha_table.is_some() || c.alpha_file.is_some() {
            return Err(CliError::config("control", "ensembles take a constant gain or a linear control"));
        }
        match (c.alpha, linear_control(c, n)?) {
            (Some(a), None) => {
                GainSchedule::constant(a).validate(ham.sigma2(), 0.0, ecfg.t1, ecfg.dt).field("control.alpha")?;
                // the modulated dynamics: same drift shape, σ² → σ² + 2α
                ham = ham.with_sigma2(ham.sigma2() + 2.0 * a).field("control.alpha")?;
            }
            (None, Some(k)) => {
                let u: ControlField = Arc::new(move |x: &[f64], _t: f64| (&k * DVector::from_column_slice(x)).as_slice().to_vec());
                control = Some(u);
            }
            (None, None) => return Err(CliError::config("control", "give alpha or linear")),
            (Some(_), Some(_)) => return Err(CliError::config("control", "a gain and a linear control are exclusive")),
        }
    }
    Ok(SdeRun { ham, x0, control, cfg: ecfg })
}

fn polymer_run(cfg: &ScenarioConfig) -> Result<PolymerRun, CliError> {
    let p = cfg.polymer.as_ref().expect("checked by caller");
    for (field, present) in [("model", cfg.model.is_some()), ("initial", cfg.initial.is_some()), ("control", cfg.control.is_some())] {
        if present {
            return Err(CliError::config(field, "not used with a polymer section"));
        }
    }
    let ecfg = ensemble_config(cfg)?;
    let gains = p.alpha_c.values();
    if gains.is_empty() {
        return Err(CliError::config("polymer.alpha_c", "at least one gain"));
    }
    let specs = gains
        .iter()
        .map(|&a| PolymerSpec::harmonic(p.masses.clone(), p.stiffness, p.gamma, a, p.kt).field("polymer"))
        .collect::<Result<Vec<_>, _>>()?;
    let [lo, hi] = p.window;
    if !(0.0 <= lo && lo < hi && hi <= ecfg.t1) {
        return Err(CliError::config("polymer.window", format!("need 0 <= start < end <= t1, got [{lo}, {hi}]")));
    }
    Ok(PolymerRun { specs, cfg: ecfg, window: (lo, hi) })
}

fn state(field: &str, bloch: &Option<[f64; 3]>, matrix: &Option<MatrixEntries>, dim: usize) -> Result<DensityOperator, CliError> {
    let rho = match (bloch, matrix) {
        (Some(r), None) => DensityOperator::bloch(*r).field(&format!("{field}_bloch"))?,
        (None, Some(m)) => {
            let name = format!("{field}_state");
            DensityOperator::new(complex_matrix(&name, m)?).field(&name)?
        }
        _ => return Err(CliError::config(field, format!("give exactly one of {field}_bloch, {field}_state"))),
    };
    if rho.dim() != dim {
        return Err(CliError::config(field, format!("dimension {} does not match the hamiltonian ({dim})", rho.dim())));
    }
    Ok(rho)
}

fn quantum_run(cfg: &ScenarioConfig) -> Result<QuantumRun, CliError> {
    let q = cfg.quantum.as_ref().ok_or_else(|| CliError::config("quantum", "missing"))?;
    for (field, present) in [("model", cfg.model.is_some()), ("initial", cfg.initial.is_some()), ("control", cfg.control.is_some())] {
        if present {
            return Err(CliError::config(field, "not used by quantum-run"));
        }
    }
    let hbar = q.hbar.unwrap_or(1.0);
    let operator = |field: &str, m: &MatrixEntries| -> Result<HamiltonianOperator, CliError> {
        HamiltonianOperator::new(complex_matrix(field, m)?).and_then(|h| h.with_hbar(hbar)).field(field)
    };
    let h = operator("quantum.hamiltonian", &q.hamiltonian)?;
    let n = h.dim();
    let delta_h = q.perturbation.as_ref().map(|m| operator("quantum.perturbation", m)).transpose()?;
    if let Some(dh) = &delta_h {
        if dh.dim() != n {
            return Err(CliError::config("quantum.perturbation", "dimension differs from the hamiltonian"));
        }
    }
    let dt = positive("numerics.dt", cfg.numerics.dt)?;
    let t1 = positive("numerics.t1", cfg.numerics.t1)?;
    let rho0 = state("quantum.initial", &q.initial_bloch, &q.initial_state, n)?;
    let open = q.channel.is_some() || q.jumps.is_some();
    if !open {
        for (field, present) in [("quantum.gamma", q.gamma.is_some()), ("quantum.beta", q.beta.is_some())] {
            if present {
                return Err(CliError::config(field, "only used with a channel or jumps"));
            }
        }
        let delta_h = delta_h.ok_or_else(|| CliError::config("quantum.perturbation", "a closed run needs a perturbation"))?;
        let tilde0 = state("quantum.tilde", &q.tilde_bloch, &q.tilde_state, n)?;
        let step = dt * cfg.numerics.record_every as f64;
        let count = (t1 / step + 1e-9).floor() as usize;
        let times = (0..=count).map(|k| k as f64 * step).collect();
        return Ok(QuantumRun::Closed { h, delta_h, rho0, tilde0, times });
    }
    if q.tilde_bloch.is_some() || q.tilde_state.is_some() {
        return Err(CliError::config("quantum.tilde", "only used by closed runs"));
    }
    let base = match (q.channel, &q.jumps) {
        (Some(ch), None) => {
            let gamma = positive("quantum.gamma", q.gamma)?;
            match ch {
                Channel::Depolarizing => LindbladSpec::depolarizing(h.clone(), gamma),
                Channel::Dephasing => LindbladSpec::dephasing(h.clone(), gamma),
            }
            .field("quantum.channel")?
        }
        (None, Some(jumps)) => {
            unused("quantum.gamma", &q.gamma, Kind::QuantumRun)?;
            let ops = jumps
                .iter()
                .enumerate()
                .map(|(k, m)| complex_matrix(&format!("quantum.jumps[{k}]"), m))
                .collect::<Result<Vec<_>, _>>()?;
            LindbladSpec::new(h.clone(), ops).field("quantum.jumps")?
        }
        _ => return Err(CliError::config("quantum", "give a channel or explicit jumps, not both")),
    };
    let reference = match q.beta {
        Some(beta) => gibbs_state(&h, beta).field("quantum.beta")?,
        None => DensityOperator::maximally_mixed(n).field("quantum")?,
    };
    let spec = match &delta_h {
        Some(dh) => base.perturbed(dh).field("quantum.perturbation")?,
        None => base.clone(),
    };
    Ok(QuantumRun::Open { spec, base, delta_h, rho0, reference, t1, dt, record_every: cfg.numerics.record_every })
}

fn paths_run(cfg: &ScenarioConfig) -> Result<PathsRun, CliError> {
    let p = cfg.paths.as_ref().ok_or_else(|| CliError::config("paths", "missing"))?;
    let sde = sde_run(cfg, Kind::PathsRun)?;
    let n = sde.ham.dim();
    let drift_grid = grid("paths.drift_grid", &p.drift_grid, n)?;
    let density_grid = grid("numerics.grid", require("numerics.grid", &cfg.numerics.grid)?, n)?;
    let steps = (sde.cfg.t1 / sde.cfg.dt).round() as usize / sde.cfg.record_every;
    if steps < 2 {
        return Err(CliError::config("numerics", "paths need at least three recorded times"));
    }
    let t_index = p.t_index.unwrap_or(steps / 2);
    if t_index == 0 || t_index >= steps {
        return Err(CliError::config("paths.t_index", format!("must lie in 1..{steps}")));
    }
    if let Some(h) = p.bandwidth {
        positive("paths.bandwidth", Some(h))?;
    }
    Ok(PathsRun { sde, drift_grid, density_grid, pooled: p.pooled, t_index, bandwidth: p.bandwidth })
}
