use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Grid, HamiltonianSpec, ScalarField, VectorFieldGrid};
use crate::schedule::Schedule;

pub type TimeVectorField = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// One additive contribution to the transport velocity.
#[derive(Clone)]
pub enum DriftTerm {
    /// `−scale(t) ∇ψ`, differenced across faces so that `exp(−ψ·scale/D)`
    /// is an exact discrete stationary state.
    Gradient { potential: ScalarField, scale: Schedule },
    /// Closed-form field `(x, t) → v`, evaluated at face midpoints.
    Closed(TimeVectorField),
    /// Cell-centered fields, one per time step, averaged onto faces.
    Sampled(Arc<Vec<VectorFieldGrid>>),
}

impl fmt::Debug for DriftTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftTerm::Gradient { scale, .. } => f.debug_struct("Gradient").field("scale", scale).finish(),
            DriftTerm::Closed(_) => f.write_str("Closed(..)"),
            DriftTerm::Sampled(v) => write!(f, "Sampled({} steps)", v.len()),
        }
    }
}

/// Transport velocity and diffusion coefficient of
/// `∂ρ/∂t + ∇·(fρ) = (σ²_eff/2) Δρ`.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    terms: Vec<DriftTerm>,
    diffusion: Schedule,
}

impl DriftSpec {
    /// No transport, diffusion `σ²_eff(t)`.
    pub fn new(diffusion: impl Into<Schedule>) -> Self {
        Self { terms: Vec::new(), diffusion: diffusion.into() }
    }

    /// Uncontrolled overdamped dynamics of `ham`: drift `−(σ²/2kT)∇H`, diffusion `σ²`.
    pub fn from_hamiltonian(ham: &HamiltonianSpec) -> Self {
        Self::new(ham.sigma2()).with_gradient(ham.energy_fn(), ham.sigma2() / (2.0 * ham.kt()))
    }

    pub fn with_gradient(mut self, potential: ScalarField, scale: impl Into<Schedule>) -> Self {
        self.terms.push(DriftTerm::Gradient { potential, scale: scale.into() });
        self
    }

    pub fn with_field(mut self, f: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.terms.push(DriftTerm::Closed(Arc::new(f)));
        self
    }

    pub fn with_sampled(mut self, fields: Vec<VectorFieldGrid>) -> Self {
        self.terms.push(DriftTerm::Sampled(Arc::new(fields)));
        self
    }

    pub fn terms(&self) -> &[DriftTerm] {
        &self.terms
    }

    pub fn diffusion(&self) -> &Schedule {
        &self.diffusion
    }

    pub(crate) fn prepare(&self, grid: &Grid) -> Result<PreparedDrift> {
        let mut potentials = Vec::new();
        let mut x = vec![0.0; grid.dim()];
        for term in &self.terms {
            match term {
                DriftTerm::Gradient { potential, .. } => {
                    let vals = (0..grid.len())
                        .map(|i| {
                            grid.center_into(i, &mut x);
                            let v = potential(&x);
                            if v.is_finite() {
                                Ok(v)
                            } else {
                                Err(Error::HamiltonianNotFinite(x.clone()))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    potentials.push(vals);
                }
                DriftTerm::Sampled(fields) => {
                    if fields.is_empty() || fields.iter().any(|f| !f.grid().same_as(grid)) {
                        return Err(Error::GridMismatch);
                    }
                    potentials.push(Vec::new());
                }
                DriftTerm::Closed(_) => potentials.push(Vec::new()),
            }
        }
        Ok(PreparedDrift { spec: self.clone(), grid: grid.clone(), potentials })
    }
}

/// A drift bound to a grid, with potentials sampled once.
pub(crate) struct PreparedDrift {
    spec: DriftSpec,
    grid: Grid,
    potentials: Vec<Vec<f64>>,
}

impl PreparedDrift {
    pub fn diffusion(&self, t: f64) -> f64 {
        self.spec.diffusion.at(t)
    }

    /// Velocity component along `axis` on the face from `left` to `left + stride`.
    pub fn face_velocity(&self, left: usize, axis: usize, t: f64, step: usize, point: &mut [f64]) -> f64 {
        let s = self.grid.stride(axis);
        let h = self.grid.spacing(axis);
        let right = left + s;
        let mut v = 0.0;
        for (term, pot) in self.spec.terms.iter().zip(&self.potentials) {
            v += match term {
                DriftTerm::Gradient { scale, .. } => -scale.at(t) * (pot[right] - pot[left]) / h,
                DriftTerm::Closed(f) => {
                    self.grid.center_into(left, point);
                    point[axis] += 0.5 * h;
                    f(point, t)[axis]
                }
                DriftTerm::Sampled(fields) => {
                    let field = &fields[step.min(fields.len() - 1)];
                    0.5 * (field.component(left, axis) + field.component(right, axis))
                }
            };
        }
        v
    }
}
