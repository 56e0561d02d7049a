//! Grid densities, Hamiltonians and the static functionals built on them.

pub mod density;
pub mod functionals;
pub mod gradient;
pub mod grid;
pub mod hamiltonian;
pub mod io;

pub use density::{GaussianDensity, GridDensity, VectorFieldGrid};
pub use functionals::{energy_gradient, energy_on_grid, flux_and_force, free_energy, gibbs_density, relative_entropy};
pub use gradient::{gradient, log_gradient, log_ratio_gradient, masked_gradient, DENSITY_FLOOR};
pub use grid::{Axis, Grid};
pub use hamiltonian::{GradientField, HamiltonianSpec, ScalarField};
