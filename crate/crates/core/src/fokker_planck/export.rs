//! CSV export of density trajectories.

use std::fmt::Write as _;

use super::solver::DensityTrajectory;
use crate::error::Result;
use crate::model::io::fmt_f64;
use crate::model::{relative_entropy, GridDensity};

/// `t, cell_index..., density` with one row per cell and time point.
pub fn trajectory_csv(traj: &DensityTrajectory) -> String {
    let grid = traj.densities[0].grid();
    let n = grid.dim();
    let mut out = String::from("t");
    for d in 0..n {
        let _ = write!(out, ",cell_index_{d}");
    }
    out.push_str(",density\n");
    for (t, rho) in traj.times.iter().zip(&traj.densities) {
        for (i, v) in rho.values().iter().enumerate() {
            out.push_str(&fmt_f64(*t));
            for d in 0..n {
                let _ = write!(out, ",{}", grid.coord(i, d));
            }
            let _ = writeln!(out, ",{}", fmt_f64(*v));
        }
    }
    out
}

/// `t, mass, mean..., cov..., D_to_equilibrium` per recorded time.
pub fn summary_csv(traj: &DensityTrajectory, equilibrium: Option<&GridDensity>) -> Result<String> {
    let n = traj.densities[0].grid().dim();
    let mut out = String::from("t,mass");
    for d in 0..n {
        let _ = write!(out, ",mean_{d}");
    }
    for a in 0..n {
        for b in 0..n {
            let _ = write!(out, ",cov_{a}{b}");
        }
    }
    out.push_str(",D_to_equilibrium\n");
    for (t, rho) in traj.times.iter().zip(&traj.densities) {
        out.push_str(&fmt_f64(*t));
        let _ = write!(out, ",{}", fmt_f64(rho.total()));
        for m in rho.mean() {
            let _ = write!(out, ",{}", fmt_f64(m));
        }
        for c in rho.covariance() {
            let _ = write!(out, ",{}", fmt_f64(c));
        }
        let d = match equilibrium {
            Some(eq) => relative_entropy(rho, eq)?.value,
            None => f64::NAN,
        };
        let _ = writeln!(out, ",{}", fmt_f64(d));
    }
    Ok(out)
}
