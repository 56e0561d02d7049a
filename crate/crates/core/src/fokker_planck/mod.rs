//! Conservative grid solver for `∂ρ/∂t + ∇·(fρ) = (σ²_eff/2)Δρ`.

pub mod boundary;
pub mod drift;
pub mod export;
pub mod solver;

pub use boundary::{check_boundary_decay, BoundaryReport, BOUNDARY_TOLERANCE};
pub use drift::{DriftSpec, DriftTerm, TimeVectorField};
pub use solver::{
    bernoulli, evolve, evolve_recorded, fitted_flux, implicit_line_solve, step_count, DensityTrajectory, FaceFlux,
    FokkerPlanckSolver, LineFlux, MAX_COURANT,
};
