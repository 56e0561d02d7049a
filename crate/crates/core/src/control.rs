//! Log-ratio feedback `u = −α(t)∇log(ρᵘ/ρ̄)` and the gain-modulated dynamics it induces.
//!
//! Under this feedback the controlled density obeys a linear Fokker-Planck
//! equation with drift `−(σ²/2 + α)(1/kT)∇H` and diffusion `σ² + 2α`, i.e. the
//! uncontrolled equation with friction and noise rescaled together.

use nalgebra::{DMatrix, DVector};

use crate::entropy_production::relative_fisher_information;
use crate::error::{Error, Result};
use crate::fokker_planck::solver::run;
use crate::fokker_planck::{step_count, DensityTrajectory, DriftSpec, FaceFlux, FokkerPlanckSolver, LineFlux};
use crate::model::{
    energy_on_grid, gibbs_density, log_ratio_gradient, GaussianDensity, Grid, GridDensity, HamiltonianSpec,
    VectorFieldGrid,
};
use crate::schedule::{PiecewiseLinear, Schedule};

/// Feedback gain `α(t)`.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    alpha: Schedule,
}

impl GainSchedule {
    pub fn new(alpha: impl Into<Schedule>) -> Self {
        Self { alpha: alpha.into() }
    }

    pub fn constant(alpha: f64) -> Self {
        Self::new(alpha)
    }

    pub fn table(table: PiecewiseLinear) -> Self {
        Self::new(Schedule::Table(table))
    }

    pub fn at(&self, t: f64) -> f64 {
        self.alpha.at(t)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.alpha
    }

    /// Checks `α > −σ²/2` at the ends of `[t0, t1]`, at every step midpoint
    /// and at every table knot inside the horizon.
    pub fn validate(&self, sigma2: f64, t0: f64, t1: f64, dt: f64) -> Result<()> {
        let bound = -0.5 * sigma2;
        let steps = step_count(t0, t1, dt)?;
        let mids = (0..steps).map(|n| t0 + (n as f64 + 0.5) * dt);
        let knots = self.alpha.knots().iter().copied().filter(|t| (t0..=t1).contains(t));
        for t in [t0, t1].into_iter().chain(mids).chain(knots) {
            let alpha = self.at(t);
            if !(alpha > bound && alpha.is_finite()) {
                return Err(Error::IllPosedGain { alpha, t: Some(t), bound });
            }
        }
        Ok(())
    }
}

fn check_gain(alpha: f64, sigma2: f64) -> Result<()> {
    let bound = -0.5 * sigma2;
    if alpha > bound && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::IllPosedGain { alpha, t: None, bound })
    }
}

/// `u = −α ∇log(ρᵘ/ρ̄)` with the shared discrete gradient.
pub fn feedback_control(rho_u: &GridDensity, equilibrium: &GridDensity, alpha: f64) -> Result<VectorFieldGrid> {
    crate::model::log_gradient(rho_u)?;
    let (g, _) = log_ratio_gradient(rho_u, equilibrium)?;
    Ok(g.scaled(-alpha))
}

/// Drift and diffusion of the gain-modulated equation.
pub fn modulated_drift(ham: &HamiltonianSpec, alpha: &GainSchedule) -> DriftSpec {
    let (s2, kt) = (ham.sigma2(), ham.kt());
    DriftSpec::new(alpha.schedule().affine(2.0, s2)).with_gradient(ham.energy_fn(), alpha.schedule().affine(1.0 / kt, 0.5 * s2 / kt))
}

/// Solves the linear modulated equation on `[0, t1]`, keeping every step.
pub fn evolve_modulated(
    ham: &HamiltonianSpec,
    alpha: &GainSchedule,
    rho0: &GridDensity,
    t1: f64,
    dt: f64,
) -> Result<DensityTrajectory> {
    evolve_modulated_recorded(ham, alpha, rho0, t1, dt, 1)
}

pub fn evolve_modulated_recorded(
    ham: &HamiltonianSpec,
    alpha: &GainSchedule,
    rho0: &GridDensity,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<DensityTrajectory> {
    alpha.validate(ham.sigma2(), 0.0, t1, dt)?;
    crate::fokker_planck::evolve_recorded(&modulated_drift(ham, alpha), rho0, 0.0, t1, dt, record_every)
}

/// `(b − a)/(ln b − ln a)`, continuous through `a = b`.
fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let r = b / a - 1.0;
    if r.abs() < 1e-6 {
        a * (1.0 + r * (0.5 - r / 12.0))
    } else {
        (b - a) / (b / a).ln()
    }
}

/// The feedback flux `u ρ` on each face, evaluated on the current iterate.
///
/// With `g = ρ/ρ̄` the face velocity is `u = −(α/h) ln(g_R/g_L)` and the face
/// density is the logarithmic mean of `g` weighted by the harmonic-type mean of
/// `ρ̄`, which keeps `u ρ` finite as either side empties.
struct FeedbackFlux<'a> {
    alpha: &'a GainSchedule,
    /// `H/kT`, so that `ρ̄ ∝ exp(−psi)`
    psi: Vec<f64>,
    grid: &'a Grid,
}

impl LineFlux for FeedbackFlux<'_> {
    fn linearize(&self, t: f64, axis: usize, cells: &[usize], iterate: &[f64], faces: &mut [FaceFlux]) {
        let c = self.alpha.at(t) / self.grid.spacing(axis);
        for (k, face) in faces.iter_mut().enumerate() {
            let (l, r) = (cells[k], cells[k + 1]);
            // 1/ρ̄ up to a per-face constant, which cancels in u ρ
            let m = self.psi[l].min(self.psi[r]);
            let (el, er) = ((self.psi[l] - m).exp(), (self.psi[r] - m).exp());
            let weight = 1.0 / log_mean(el, er);
            let (gl, gr) = (iterate[k] * el, iterate[k + 1] * er);
            let value = if gl > 0.0 && gr > 0.0 {
                let u = -c * (gr / gl).ln();
                u * weight * log_mean(gl, gr)
            } else {
                -c * weight * (gr - gl)
            };
            let dl = c * weight * el;
            let dr = c * weight * er;
            face.left += dl;
            face.right += dr;
            face.offset += value - dl * iterate[k] + dr * iterate[k + 1];
        }
    }
}

/// Simulates the uncontrolled dynamics with the feedback `u = −α∇log(ρᵘ/ρ̄)`
/// applied literally, the feedback being made self-consistent with the
/// end-of-step density by Newton iteration on each grid line.
pub fn evolve_feedback(
    ham: &HamiltonianSpec,
    alpha: &GainSchedule,
    rho0: &GridDensity,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<DensityTrajectory> {
    alpha.validate(ham.sigma2(), 0.0, t1, dt)?;
    let grid = rho0.grid();
    let psi: Vec<f64> = energy_on_grid(ham, grid)?.iter().map(|e| e / ham.kt()).collect();
    let flux = FeedbackFlux { alpha, psi, grid };
    let solver = FokkerPlanckSolver::new(&DriftSpec::from_hamiltonian(ham), grid, dt)?;
    run(&solver, rho0, 0.0, t1, record_every, Some(&flux))
}

/// Pass one of the off-line scheme: solves the modulated equation and returns
/// the feedback field of every step, evaluated on the end-of-step density at
/// the step-midpoint gain.
pub fn precompute_feedback(
    ham: &HamiltonianSpec,
    alpha: &GainSchedule,
    rho0: &GridDensity,
    t1: f64,
    dt: f64,
) -> Result<Vec<VectorFieldGrid>> {
    let traj = evolve_modulated(ham, alpha, rho0, t1, dt)?;
    let eq = gibbs_density(ham, rho0.grid())?.value;
    traj.densities[1..]
        .iter()
        .enumerate()
        .map(|(n, rho)| feedback_control(rho, &eq, alpha.at((n as f64 + 0.5) * dt)))
        .collect()
}

/// Pass two: replays precomputed feedback fields as an open-loop control of
/// the uncontrolled dynamics.
pub fn replay_feedback(
    ham: &HamiltonianSpec,
    controls: Vec<VectorFieldGrid>,
    rho0: &GridDensity,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<DensityTrajectory> {
    if controls.len() != step_count(0.0, t1, dt)? {
        return Err(Error::InvalidArgument(format!("{} control fields for the horizon", controls.len())));
    }
    let drift = DriftSpec::from_hamiltonian(ham).with_sampled(controls);
    crate::fokker_planck::evolve_recorded(&drift, rho0, 0.0, t1, dt, record_every)
}

/// `d/dt D(ρᵘ‖ρ̄) = −(σ²/2 + α) ∫ |∇log(ρᵘ/ρ̄)|² ρᵘ dx` under the feedback with gain `α`.
pub fn modulated_decay_rate(rho_u: &GridDensity, ham: &HamiltonianSpec, alpha: f64) -> Result<f64> {
    check_gain(alpha, ham.sigma2())?;
    let eq = gibbs_density(ham, rho_u.grid())?.value;
    Ok(-(0.5 * ham.sigma2() + alpha) * relative_fisher_information(rho_u, &eq)?)
}

/// Mean and covariance of a Gaussian density at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMarkovState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub time: f64,
}

impl GaussMarkovState {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, time: f64) -> Result<Self> {
        let state = Self { mean, covariance, time };
        state.density()?;
        Ok(state)
    }

    pub fn density(&self) -> Result<GaussianDensity> {
        GaussianDensity::new(self.mean.clone(), self.covariance.clone())
    }

    /// `D(N(m, P) ‖ N(0, kT Q⁻¹))` for `H = ½ xᵀQx`.
    pub fn divergence_to_equilibrium(&self, ham: &HamiltonianSpec) -> Result<f64> {
        let eq = gauss_markov_equilibrium(ham)?;
        Ok(self.density()?.kl_divergence(&eq))
    }
}

fn quadratic_part(ham: &HamiltonianSpec) -> Result<&DMatrix<f64>> {
    ham.quadratic_form()
        .ok_or_else(|| Error::NotPositiveDefinite("hamiltonian is not a quadratic form".into()))
}

/// `N(0, kT Q⁻¹)`.
pub fn gauss_markov_equilibrium(ham: &HamiltonianSpec) -> Result<GaussianDensity> {
    let q = quadratic_part(ham)?;
    let inv = q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Q".into()))?
        .inverse();
    GaussianDensity::new(DVector::zeros(q.nrows()), inv * ham.kt())
}

/// Integrates `dm/dt = A m`, `dP/dt = AP + PAᵀ + (σ² + 2α)I` with
/// `A = −(σ²/2 + α)Q/kT` by classical Runge-Kutta on `[state0.time, t1]`.
pub fn gauss_markov_propagate(
    ham: &HamiltonianSpec,
    alpha: &GainSchedule,
    state0: &GaussMarkovState,
    t1: f64,
    dt: f64,
) -> Result<Vec<GaussMarkovState>> {
    let q = quadratic_part(ham)?.clone();
    let n = q.nrows();
    if state0.mean.len() != n || state0.covariance.nrows() != n {
        return Err(Error::InvalidArgument("state dimension does not match Q".into()));
    }
    let (s2, kt) = (ham.sigma2(), ham.kt());
    let t0 = state0.time;
    alpha.validate(s2, t0, t1, dt)?;
    let steps = step_count(t0, t1, dt)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let rhs = |t: f64, m: &DVector<f64>, p: &DMatrix<f64>| {
        let a = alpha.at(t);
        let drift = &q * (-(0.5 * s2 + a) / kt);
        let dm = &drift * m;
        let dp = &drift * p + p * drift.transpose() + &eye * (s2 + 2.0 * a);
        (dm, dp)
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state0.clone());
    let (mut m, mut p) = (state0.mean.clone(), state0.covariance.clone());
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let (m1, p1) = rhs(t, &m, &p);
        let (m2, p2) = rhs(t + 0.5 * dt, &(&m + &m1 * (0.5 * dt)), &(&p + &p1 * (0.5 * dt)));
        let (m3, p3) = rhs(t + 0.5 * dt, &(&m + &m2 * (0.5 * dt)), &(&p + &p2 * (0.5 * dt)));
        let (m4, p4) = rhs(t + dt, &(&m + &m3 * dt), &(&p + &p3 * dt));
        m += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (dt / 6.0);
        p += (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (dt / 6.0);
        p = (&p + p.transpose()) * 0.5;
        out.push(GaussMarkovState::new(m.clone(), p.clone(), t0 + (k + 1) as f64 * dt)?);
    }
    Ok(out)
}
