use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hamiltonian not finite at {0:?}")]
    HamiltonianNotFinite(Vec<f64>),

    #[error("gradient does not match finite differences of the hamiltonian at {point:?} (relative error {rel_error:.3e})")]
    GradientMismatch { point: Vec<f64>, rel_error: f64 },

    #[error("log-density undefined: nonpositive density in interior cell {0}")]
    LogDensityUndefined(usize),

    #[error("stability violation: Courant number {courant:.3} exceeds {limit}; use dt <= {suggested_dt:.3e}")]
    Stability { courant: f64, limit: f64, suggested_dt: f64 },

    #[error("positivity lost: density {value:.3e} in cell {cell} at t = {t}")]
    PositivityLost { cell: usize, value: f64, t: f64 },

    #[error("FE identity violated: {flux_form:.12e} vs {fisher_form:.12e}")]
    FreeEnergyIdentity { fisher_form: f64, flux_form: f64 },

    #[error("ill-posed gain: alpha = {alpha}{} must exceed -sigma^2/2 = {bound}", at_time(.t))]
    IllPosedGain { alpha: f64, t: Option<f64>, bound: f64 },

    #[error("matrix not positive-definite: {0}")]
    NotPositiveDefinite(String),

    #[error("trajectory divergence: trajectory {trajectory} left the escape radius {radius} at step {step}")]
    TrajectoryDivergence { trajectory: usize, step: usize, radius: f64 },

    #[error("coverage failure: {escaped_fraction:.4} of samples fall outside the grid")]
    Coverage { escaped_fraction: f64 },

    #[error("operator not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density operator: {0}")]
    InvalidState(String),

    #[error("log of singular state (smallest eigenvalue {0:.3e})")]
    SingularState(f64),

    #[error("stationary state does not commute with the effective hamiltonian (norm {0:.3e})")]
    NonCommutingStationary(f64),

    #[error("positivity violation: eigenvalue {eigenvalue:.3e} at t = {t}; use dt <= {suggested_dt:.3e}")]
    QuantumPositivity { eigenvalue: f64, t: f64, suggested_dt: f64 },

    #[error("rate has non-negligible imaginary part {0:.3e}")]
    ComplexRate(f64),

    #[error("parse error: {0}")]
    Parse(String),
}

fn at_time(t: &Option<f64>) -> String {
    t.map(|t| format!(" at t = {t}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal diagnostics attached to a computed value.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Equilibrium density is not negligible on the box boundary.
    BoundaryMass { boundary_max: f64, interior_max: f64 },
    /// Operands of a divergence carry different total mass.
    MassMismatch { lhs: f64, rhs: f64 },
    /// Boundary-decay certificate failed; integration by parts is suspect.
    BoundarySuspect { max_term: f64 },
}

/// A value together with the warnings raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Self { value, warnings: Vec::new() }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn into_value(self) -> T {
        self.value
    }
}
