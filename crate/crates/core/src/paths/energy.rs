use std::fmt;
use std::sync::Arc;

use super::drift::DriftEstimate;
use crate::error::{Error, Result};
use crate::sde::{Estimate, PathEnsemble};

/// Drift evaluated along paths: a closed form `β(x, t)` or a binned estimate.
#[derive(Clone, Copy)]
pub enum DriftField<'a> {
    Closed(&'a (dyn Fn(&[f64], f64) -> Vec<f64> + Sync)),
    Estimated(&'a DriftEstimate),
}

impl DriftField<'_> {
    fn eval(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        match self {
            Self::Closed(f) => Some(f(x, t)),
            Self::Estimated(e) => e.at(x).map(<[f64]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteEnergy {
    /// `E ∫ ‖β(x(t), t)‖² dt` with its standard error over paths.
    pub estimate: Estimate,
    /// Fraction of path points where an estimated field had no populated cell.
    pub uncovered_fraction: f64,
}

/// Monte Carlo `E ∫ ‖β‖² dt` over the ensemble horizon, trapezoidal in time.
/// Points outside populated cells of an estimated field contribute zero.
pub fn finite_energy_estimate(ens: &PathEnsemble, field: DriftField<'_>) -> Result<FiniteEnergy> {
    if ens.n_times() < 2 {
        return Err(Error::InvalidArgument("finite-energy estimate needs at least two recorded times".into()));
    }
    let times = ens.times();
    let last = times.len() - 1;
    let mut uncovered = 0usize;
    let mut per_path = Vec::with_capacity(ens.n_paths());
    for p in 0..ens.n_paths() {
        let mut s = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            match field.eval(ens.state(p, k), t) {
                Some(b) => s += w * b.iter().map(|v| v * v).sum::<f64>(),
                None => uncovered += 1,
            }
        }
        per_path.push(s * ens.dt());
    }
    Ok(FiniteEnergy {
        estimate: Estimate::from_samples(&per_path),
        uncovered_fraction: uncovered as f64 / (ens.n_paths() * times.len()) as f64,
    })
}

/// Smooth test function with its gradient.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).finish_non_exhaustive()
    }
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f), grad: Arc::new(grad) }
    }

    /// `x_d`.
    pub fn coordinate(d: usize) -> Self {
        Self::new(format!("x{d}"), move |x| x[d], move |x| {
            let mut g = vec![0.0; x.len()];
            g[d] = 1.0;
            g
        })
    }

    /// `x_d²`.
    pub fn square(d: usize) -> Self {
        Self::new(format!("x{d}^2"), move |x| x[d] * x[d], move |x| {
            let mut g = vec![0.0; x.len()];
            g[d] = 2.0 * x[d];
            g
        })
    }

    /// `cos x_d`.
    pub fn cosine(d: usize) -> Self {
        Self::new(format!("cos x{d}"), move |x| x[d].cos(), move |x| {
            let mut g = vec![0.0; x.len()];
            g[d] = -x[d].sin();
            g
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub name: String,
    /// `d/dt ⟨φ⟩` by central difference.
    pub lhs: Estimate,
    /// `⟨∇φ · v̂⟩`.
    pub rhs: Estimate,
    /// Paired per-path difference of the two sides.
    pub discrepancy: Estimate,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub relative: f64,
    pub excluded_fraction: f64,
    /// Discrepancy within three standard errors (or below rounding when both sides are exact).
    pub pass: bool,
}

/// Weak continuity `d/dt ⟨φ⟩ = ⟨∇φ · v⟩` at `t_index`, for paths whose
/// position at `t_index` lies in a populated cell of `v`.
pub fn weak_continuity_check(
    ens: &PathEnsemble,
    t_index: usize,
    v: &DriftEstimate,
    tests: &[TestFunction],
) -> Result<Vec<ContinuityReport>> {
    if ens.n_times() < 3 || t_index == 0 || t_index + 1 >= ens.n_times() {
        return Err(Error::InvalidArgument(format!("time index {t_index} has no neighbours on both sides")));
    }
    if ens.dim() != v.dim() {
        return Err(Error::GridMismatch);
    }
    let dt = ens.dt();
    let inside: Vec<(usize, &[f64])> =
        (0..ens.n_paths()).filter_map(|p| v.at(ens.state(p, t_index)).map(|vel| (p, vel))).collect();
    let excluded_fraction = 1.0 - inside.len() as f64 / ens.n_paths() as f64;
    if inside.len() < 2 {
        return Err(Error::InvalidArgument("too few paths in populated cells".into()));
    }
    Ok(tests
        .iter()
        .map(|phi| {
            let mut l = Vec::with_capacity(inside.len());
            let mut r = Vec::with_capacity(inside.len());
            for &(p, vel) in &inside {
                let x = ens.state(p, t_index);
                l.push(((phi.f)(ens.state(p, t_index + 1)) - (phi.f)(ens.state(p, t_index - 1))) / (2.0 * dt));
                r.push((phi.grad)(x).iter().zip(vel).map(|(g, u)| g * u).sum::<f64>());
            }
            let diff: Vec<f64> = l.iter().zip(&r).map(|(a, b)| a - b).collect();
            let (lhs, rhs) = (Estimate::from_samples(&l), Estimate::from_samples(&r));
            let discrepancy = Estimate::from_samples(&diff);
            let scale = lhs.value.abs().max(rhs.value.abs());
            let relative = if scale > 0.0 { (lhs.value - rhs.value).abs() / scale } else { 0.0 };
            let rounding = 1e-12 * (1.0 + scale);
            let pass = discrepancy.value.abs() <= 3.0 * discrepancy.se + rounding;
            ContinuityReport {
                name: phi.name.clone(),
                lhs,
                rhs,
                discrepancy,
                relative,
                excluded_fraction,
                pass,
            }
        })
        .collect())
}
