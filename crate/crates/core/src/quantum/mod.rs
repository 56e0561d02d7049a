//! Finite-dimensional closed and open quantum dynamics and relative-entropy rates.

mod dynamics;
pub mod io;
mod operators;
mod rates;

pub use dynamics::{
    evolve_closed, gibbs_state, lindblad_evolve, lindblad_evolve_recorded, LindbladSpec, LindbladTrajectory,
    POSITIVITY_FLOOR,
};
pub use operators::{pauli_x, pauli_y, pauli_z, CMatrix, DensityOperator, HamiltonianOperator, C64, RANK_THRESHOLD};
pub use rates::{
    dissipative_production_rate, qrec_rate, qrecd_rate, quantum_relative_entropy, QrecdRates, COMMUTATION_TOL,
    IMAGINARY_TOL,
};
