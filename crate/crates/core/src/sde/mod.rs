//! Monte Carlo ensembles of overdamped and underdamped Langevin dynamics.

mod ensemble;
mod export;
mod kde;
mod overdamped;
mod polymer;

pub use ensemble::{EnsembleConfig, Estimate, InitialDistribution, PathEnsemble, ESCAPE_FACTOR};
pub use export::{ensemble_csv, ensemble_summary_csv};
pub use kde::{estimate_density, estimate_density_pooled, silverman_bandwidth, Bandwidth, MIN_COVERAGE};
pub use overdamped::{simulate_overdamped, ControlField};
pub use polymer::{kinetic_temperature, simulate_polymer, PolymerSpec, BLOCK_DIM};
