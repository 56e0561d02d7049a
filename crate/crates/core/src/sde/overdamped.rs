use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::ensemble::{check_escape, simulate_paths, EnsembleConfig, InitialDistribution, PathEnsemble, ESCAPE_FACTOR};
use crate::error::{Error, Result};
use crate::model::HamiltonianSpec;

/// Control `u(x, t)` added to the overdamped drift.
pub type ControlField = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

fn default_radius(ham: &HamiltonianSpec, x0: &InitialDistribution) -> f64 {
    let (center, spread) = x0.reach();
    let eq = ham
        .quadratic_form()
        .map(|q| (ham.kt() / q.clone().symmetric_eigen().eigenvalues.min()).sqrt())
        .unwrap_or(0.0);
    center + ESCAPE_FACTOR * eq.max(spread).max(1.0)
}

/// Euler-Maruyama paths of `dx = [−(σ²/2kT)∇H + u] dt + σ dW`.
pub fn simulate_overdamped(
    ham: &HamiltonianSpec,
    control: Option<ControlField>,
    x0: &InitialDistribution,
    cfg: &EnsembleConfig,
) -> Result<PathEnsemble> {
    let n = ham.dim();
    if x0.dim() != n {
        return Err(Error::InvalidArgument("initial distribution and hamiltonian dimensions differ".into()));
    }
    let (steps, n_times) = cfg.validate()?;
    let radius = cfg.escape_radius.unwrap_or_else(|| default_radius(ham, x0));
    let sigma = ham.sigma2().sqrt();
    let sqdt = cfg.dt.sqrt();
    let sample = x0.sampler();
    simulate_paths(cfg, n, n_times, |p, rng, out| {
        let mut x = vec![0.0; n];
        sample(rng, &mut x);
        out[..n].copy_from_slice(&x);
        for k in 0..steps {
            let t = k as f64 * cfg.dt;
            let mut b = ham.drift(&x);
            if let Some(u) = &control {
                b.iter_mut().zip(u(&x, t)).for_each(|(bi, ui)| *bi += ui);
            }
            for i in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                x[i] += b[i] * cfg.dt + sigma * sqdt * z;
            }
            check_escape(&x, radius, p, k + 1)?;
            if (k + 1) % cfg.record_every == 0 {
                let r = (k + 1) / cfg.record_every;
                out[r * n..(r + 1) * n].copy_from_slice(&x);
            }
        }
        Ok(())
    })
}
