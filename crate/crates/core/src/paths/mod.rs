//! Forward, backward and current drifts estimated from path ensembles, with
//! the osmotic relation, finite-energy and weak-continuity diagnostics.

mod drift;
mod energy;
mod export;

pub use drift::{
    current_drift, estimate_backward_drift, estimate_backward_drift_pooled, estimate_forward_drift,
    estimate_forward_drift_pooled, osmotic_residual, DriftEstimate, MIN_COUNT,
};
pub use energy::{finite_energy_estimate, weak_continuity_check, ContinuityReport, DriftField, FiniteEnergy, TestFunction};
pub use export::drift_csv;
