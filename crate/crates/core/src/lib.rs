//! Relative-entropy production for controlled Markovian evolutions.
//!
//! The crate covers grid Fokker-Planck dynamics and their divergence rates,
//! gain-modulated feedback, Monte Carlo Langevin ensembles, forward/backward
//! drift kinematics of path ensembles, and finite-dimensional closed and open
//! quantum systems.

pub mod control;
pub mod entropy_production;
pub mod error;
pub mod fokker_planck;
pub mod model;
pub mod paths;
pub mod quantum;
pub mod schedule;
pub mod sde;

pub use error::{Error, Flagged, Result, Warning};
