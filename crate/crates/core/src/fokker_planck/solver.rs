//! Exponentially fitted finite-volume stepping.
//!
//! Face fluxes use the Scharfetter-Gummel (Chang-Cooper type) weights
//! `F = (D/h)[B(−w) ρ_L − B(w) ρ_R]` with `B(w) = w/(eʷ − 1)` and Péclet number
//! `w = a h / D`. Time stepping is backward Euler, one axis at a time, with
//! zero flux through the walls. Every step telescopes, so mass is conserved,
//! and the line matrices are M-matrices, so positivity holds for any `dt`.

use super::drift::{DriftSpec, PreparedDrift};
use crate::error::{Error, Result};
use crate::model::{Grid, GridDensity};

/// Largest accepted `dt·|a|/h` over all faces.
pub const MAX_COURANT: f64 = 10.0;
/// Values more negative than this abort the run.
pub const POSITIVITY_FLOOR: f64 = -1e-12;

const MAX_DIM: usize = 3;
const NEWTON_MAX_ITER: usize = 30;
const NEWTON_RTOL: f64 = 1e-13;

/// Face flux linear in the two adjacent cells: `F = left·ρ_L − right·ρ_R + offset`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FaceFlux {
    pub left: f64,
    pub right: f64,
    pub offset: f64,
}

impl FaceFlux {
    pub fn eval(&self, rho_l: f64, rho_r: f64) -> f64 {
        self.left * rho_l - self.right * rho_r + self.offset
    }
}

/// `B(w) = w / (eʷ − 1)`.
pub fn bernoulli(w: f64) -> f64 {
    if w.abs() < 1e-8 {
        1.0 - 0.5 * w
    } else {
        w / w.exp_m1()
    }
}

/// Exponentially fitted flux for diffusion `D = σ²_eff/2` and face velocity `a`.
/// Falls back to upwinding when `D = 0`.
pub fn fitted_flux(diffusion: f64, velocity: f64, h: f64) -> FaceFlux {
    if diffusion <= 0.0 {
        return FaceFlux { left: velocity.max(0.0), right: (-velocity).max(0.0), offset: 0.0 };
    }
    let w = velocity * h / diffusion;
    let c = diffusion / h;
    FaceFlux { left: c * bernoulli(-w), right: c * bernoulli(w), offset: 0.0 }
}

/// Solves `ρ_i + r(F_{i+½} − F_{i−½}) = old_i` on one line with closed ends.
pub fn implicit_line_solve(faces: &[FaceFlux], r: f64, old: &[f64], out: &mut [f64]) {
    let m = old.len();
    debug_assert_eq!(faces.len() + 1, m);
    let mut lower = vec![0.0; m];
    let mut diag = vec![1.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = old.to_vec();
    for (k, f) in faces.iter().enumerate() {
        // face k joins cells k and k+1
        diag[k] += r * f.left;
        upper[k] -= r * f.right;
        rhs[k] -= r * f.offset;
        diag[k + 1] += r * f.right;
        lower[k + 1] -= r * f.left;
        rhs[k + 1] += r * f.offset;
    }
    thomas(&lower, &diag, &upper, &mut rhs);
    out.copy_from_slice(&rhs);
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..m {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

/// A state-dependent flux added on top of the drift, linearized per line.
pub trait LineFlux {
    /// Adds the tangent of the extra flux at `iterate` to `faces`.
    ///
    /// `t` is the step midpoint, `cells` the flat indices of the line,
    /// `iterate` the current values on it, and face `k` joins `cells[k]` to
    /// `cells[k + 1]`.
    fn linearize(&self, t: f64, axis: usize, cells: &[usize], iterate: &[f64], faces: &mut [FaceFlux]);
}

/// Stepper for one drift on one grid with a fixed `dt`.
pub struct FokkerPlanckSolver {
    drift: PreparedDrift,
    grid: Grid,
    dt: f64,
}

impl FokkerPlanckSolver {
    pub fn new(drift: &DriftSpec, grid: &Grid, dt: f64) -> Result<Self> {
        if grid.dim() > MAX_DIM {
            return Err(Error::InvalidGrid(format!("grid solver supports at most {MAX_DIM} dimensions")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { drift: drift.prepare(grid)?, grid: grid.clone(), dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances `values` from `t` to `t + dt`; coefficients are sampled at the
    /// step midpoint.
    pub fn step(&self, values: &mut [f64], t: f64, step: usize) -> Result<()> {
        self.step_with(values, t, step, None)
    }

    /// As [`step`](Self::step), with an extra state-dependent flux solved by
    /// Newton iteration on each line.
    pub fn step_with(&self, values: &mut [f64], t: f64, step: usize, extra: Option<&dyn LineFlux>) -> Result<()> {
        let tm = t + 0.5 * self.dt;
        let diffusion = 0.5 * self.drift.diffusion(tm);
        if !(diffusion >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative diffusion {} at t = {tm}", 2.0 * diffusion)));
        }
        let mut point = vec![0.0; self.grid.dim()];
        for axis in 0..self.grid.dim() {
            let m = self.grid.axis(axis).cells;
            let s = self.grid.stride(axis);
            let h = self.grid.spacing(axis);
            let r = self.dt / h;
            let mut cells = vec![0; m];
            let mut old = vec![0.0; m];
            let mut new = vec![0.0; m];
            let mut base = vec![FaceFlux::default(); m - 1];
            let starts: Vec<usize> = self.grid.line_starts(axis).collect();
            for start in starts {
                for k in 0..m {
                    cells[k] = start + k * s;
                    old[k] = values[cells[k]];
                }
                for k in 0..m - 1 {
                    let a = self.drift.face_velocity(cells[k], axis, tm, step, &mut point);
                    let courant = self.dt * a.abs() / h;
                    if courant > MAX_COURANT {
                        return Err(Error::Stability {
                            courant,
                            limit: MAX_COURANT,
                            suggested_dt: MAX_COURANT * h / a.abs(),
                        });
                    }
                    base[k] = fitted_flux(diffusion, a, h);
                }
                match extra {
                    None => implicit_line_solve(&base, r, &old, &mut new),
                    Some(flux) => newton_line(flux, tm, axis, &cells, &base, r, &old, &mut new)?,
                }
                for k in 0..m {
                    let v = new[k];
                    if v < POSITIVITY_FLOOR || !v.is_finite() {
                        return Err(Error::PositivityLost { cell: cells[k], value: v, t: t + self.dt });
                    }
                    values[cells[k]] = v.max(0.0);
                }
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn newton_line(
    flux: &dyn LineFlux,
    t: f64,
    axis: usize,
    cells: &[usize],
    base: &[FaceFlux],
    r: f64,
    old: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let mut iterate = old.to_vec();
    let mut faces = base.to_vec();
    let scale = old.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..NEWTON_MAX_ITER {
        faces.copy_from_slice(base);
        flux.linearize(t, axis, cells, &iterate, &mut faces);
        implicit_line_solve(&faces, r, old, out);
        let change = out.iter().zip(&iterate).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        iterate.copy_from_slice(out);
        if change <= NEWTON_RTOL * scale {
            return Ok(());
        }
    }
    Err(Error::InvalidArgument("self-consistent flux iteration did not converge".into()))
}

/// Densities on a uniform time grid.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub densities: Vec<GridDensity>,
}

impl DensityTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &GridDensity {
        self.densities.last().expect("trajectory holds the initial density")
    }

    /// Largest `|mass(ρ_t) − mass(ρ_0)|` along the run.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.densities[0].total();
        self.densities.iter().map(|d| (d.total() - m0).abs()).fold(0.0, f64::max)
    }
}

/// Number of steps of size `dt` spanning `[t0, t1]`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(t1 >= t0) || !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("bad horizon [{t0}, {t1}] with dt = {dt}")));
    }
    let n = ((t1 - t0) / dt).round();
    if (n * dt - (t1 - t0)).abs() > 1e-9 * (t1 - t0).abs().max(dt) {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide [{t0}, {t1}]")));
    }
    Ok(n as usize)
}

/// Evolves `rho0` over `[t0, t1]`, keeping every step.
pub fn evolve(drift: &DriftSpec, rho0: &GridDensity, t0: f64, t1: f64, dt: f64) -> Result<DensityTrajectory> {
    evolve_recorded(drift, rho0, t0, t1, dt, 1)
}

/// Evolves `rho0`, keeping every `record_every`-th step and the final one.
pub fn evolve_recorded(
    drift: &DriftSpec,
    rho0: &GridDensity,
    t0: f64,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<DensityTrajectory> {
    let solver = FokkerPlanckSolver::new(drift, rho0.grid(), dt)?;
    run(&solver, rho0, t0, t1, record_every, None)
}

pub(crate) fn run(
    solver: &FokkerPlanckSolver,
    rho0: &GridDensity,
    t0: f64,
    t1: f64,
    record_every: usize,
    extra: Option<&dyn LineFlux>,
) -> Result<DensityTrajectory> {
    let dt = solver.dt();
    let steps = step_count(t0, t1, dt)?;
    let every = record_every.max(1);
    let mut values = rho0.values().to_vec();
    let mut times = vec![t0];
    let mut densities = vec![rho0.clone()];
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        solver.step_with(&mut values, t, n, extra)?;
        if (n + 1) % every == 0 || n + 1 == steps {
            times.push(t0 + (n + 1) as f64 * dt);
            densities.push(GridDensity::new(rho0.grid().clone(), values.clone())?);
        }
    }
    Ok(DensityTrajectory { times, densities })
}
