//! CSV export of path ensembles.

use std::fmt::Write as _;

use super::ensemble::PathEnsemble;
use super::polymer::{PolymerSpec, BLOCK_DIM};
use crate::error::{Error, Result};
use crate::model::io::fmt_f64;

/// `t, trajectory, x_0, ...` with one row per path and recorded time.
pub fn ensemble_csv(ensemble: &PathEnsemble) -> String {
    let mut out = String::from("t,trajectory");
    for d in 0..ensemble.dim() {
        let _ = write!(out, ",x_{d}");
    }
    out.push('\n');
    for p in 0..ensemble.n_paths() {
        for (k, t) in ensemble.times().iter().enumerate() {
            let _ = write!(out, "{},{p}", fmt_f64(*t));
            for v in ensemble.state(p, k) {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
    }
    out
}

/// `t, mean..., cov..., kinetic_temperature` per recorded time. The
/// temperature column is the instantaneous ensemble value for polymer
/// ensembles and NaN otherwise.
pub fn ensemble_summary_csv(ensemble: &PathEnsemble, polymer: Option<&PolymerSpec>) -> Result<String> {
    let n = ensemble.dim();
    if let Some(spec) = polymer {
        if n != 2 * spec.config_dim() {
            return Err(Error::InvalidArgument("ensemble is not a phase-space ensemble of this polymer".into()));
        }
    }
    let mut out = String::from("t");
    for d in 0..n {
        let _ = write!(out, ",mean_{d}");
    }
    for a in 0..n {
        for b in 0..n {
            let _ = write!(out, ",cov_{a}_{b}");
        }
    }
    out.push_str(",kinetic_temperature\n");
    for (k, t) in ensemble.times().iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for m in ensemble.mean(k) {
            let _ = write!(out, ",{}", fmt_f64(m));
        }
        for c in ensemble.covariance(k) {
            let _ = write!(out, ",{}", fmt_f64(c));
        }
        let temp = match polymer {
            Some(spec) => {
                let q = spec.config_dim();
                let total: f64 = ensemble
                    .slice(k)
                    .map(|x| (0..q).map(|i| x[q + i].powi(2) / spec.masses()[i / BLOCK_DIM]).sum::<f64>())
                    .sum();
                total / (ensemble.n_paths() * q) as f64
            }
            None => f64::NAN,
        };
        let _ = writeln!(out, ",{}", fmt_f64(temp));
    }
    Ok(out)
}
