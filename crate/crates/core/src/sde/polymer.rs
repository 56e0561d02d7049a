use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::ensemble::{
    check_escape, simulate_paths, EnsembleConfig, Estimate, InitialDistribution, PathEnsemble, ESCAPE_FACTOR,
};
use crate::error::{Error, Result};
use crate::model::{GradientField, HamiltonianSpec, ScalarField};

/// Spatial dimension of one building block.
pub const BLOCK_DIM: usize = 3;

const FDT_TOLERANCE: f64 = 1e-12;

/// Chain of rigid blocks in an internal potential, with friction `−γV`,
/// velocity feedback `−α_c V` and thermal noise on the momenta only.
///
/// Phase-space states are `(q, p)` with `q, p ∈ ℝ^{3N}` and `V = p/m`.
#[derive(Debug, Clone)]
pub struct PolymerSpec {
    masses: Vec<f64>,
    potential: HamiltonianSpec,
    gamma: f64,
    alpha_c: f64,
    kt: f64,
    noise: DMatrix<f64>,
    stiffness: Option<f64>,
    initial: InitialDistribution,
}

impl PolymerSpec {
    /// Noise defaults to `Γ = √(2γkT) I`, the fluctuation-dissipation choice.
    pub fn new(
        masses: Vec<f64>,
        potential: ScalarField,
        gradient: GradientField,
        gamma: f64,
        alpha_c: f64,
        kt: f64,
    ) -> Result<Self> {
        if masses.is_empty() || masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument("masses must be positive".into()));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("friction must be nonnegative, got {gamma}")));
        }
        if !(alpha_c >= 0.0 && alpha_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("feedback gain must be nonnegative, got {alpha_c}")));
        }
        let d = BLOCK_DIM * masses.len();
        let potential = HamiltonianSpec::new(d, potential, gradient, kt, 0.0)?;
        let noise = DMatrix::identity(d, d) * (2.0 * gamma * kt).sqrt();
        let initial = InitialDistribution::Point(vec![0.0; 2 * d]);
        Ok(Self { masses, potential, gamma, alpha_c, kt, noise, stiffness: None, initial })
    }

    /// Every block tethered by `φ = K|q|²/2`.
    pub fn harmonic(masses: Vec<f64>, stiffness: f64, gamma: f64, alpha_c: f64, kt: f64) -> Result<Self> {
        if !(stiffness > 0.0) {
            return Err(Error::InvalidArgument(format!("spring constant must be positive, got {stiffness}")));
        }
        let mut spec = Self::new(
            masses,
            Arc::new(move |q: &[f64]| 0.5 * stiffness * q.iter().map(|v| v * v).sum::<f64>()),
            Arc::new(move |q: &[f64]| q.iter().map(|v| stiffness * v).collect()),
            gamma,
            alpha_c,
            kt,
        )?;
        spec.stiffness = Some(stiffness);
        Ok(spec)
    }

    /// Replaces the momentum noise matrix; it must satisfy `ΓΓᵀ = 2γkT I`.
    pub fn with_noise(mut self, noise: DMatrix<f64>) -> Result<Self> {
        let d = self.config_dim();
        if noise.nrows() != d || noise.ncols() != d {
            return Err(Error::InvalidArgument(format!("noise matrix must be {d}x{d}")));
        }
        let target = DMatrix::identity(d, d) * (2.0 * self.gamma * self.kt);
        let dev = (&noise * noise.transpose() - target).amax();
        if dev > FDT_TOLERANCE * (2.0 * self.gamma * self.kt).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "noise violates fluctuation-dissipation balance by {dev:.3e}"
            )));
        }
        self.noise = noise;
        Ok(self)
    }

    /// Removes friction and noise together (Hamiltonian limit when `α_c = 0`).
    pub fn frictionless(mut self) -> Self {
        let d = self.config_dim();
        self.gamma = 0.0;
        self.noise = DMatrix::zeros(d, d);
        self
    }

    pub fn with_gain(mut self, alpha_c: f64) -> Result<Self> {
        if !(alpha_c >= 0.0 && alpha_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("feedback gain must be nonnegative, got {alpha_c}")));
        }
        self.alpha_c = alpha_c;
        Ok(self)
    }

    /// Initial law over the `6N`-dimensional phase space; defaults to rest at the origin.
    pub fn with_initial(mut self, initial: InitialDistribution) -> Result<Self> {
        if initial.dim() != 2 * self.config_dim() {
            return Err(Error::InvalidArgument("initial state must cover positions and momenta".into()));
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn blocks(&self) -> usize {
        self.masses.len()
    }

    /// `3N`.
    pub fn config_dim(&self) -> usize {
        BLOCK_DIM * self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha_c(&self) -> f64 {
        self.alpha_c
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    fn mass_of(&self, i: usize) -> f64 {
        self.masses[i / BLOCK_DIM]
    }

    /// `H(q, p) = Σ |p_k|²/2m_k + φ(q)`.
    pub fn energy(&self, state: &[f64]) -> f64 {
        let d = self.config_dim();
        let kinetic: f64 = (0..d).map(|i| state[d + i].powi(2) / (2.0 * self.mass_of(i))).sum();
        kinetic + self.potential.energy(&state[..d])
    }

    fn default_radius(&self) -> f64 {
        let m_max = self.masses.iter().copied().fold(0.0, f64::max);
        let mut scale = (self.kt * m_max).sqrt().max(1.0);
        if let Some(k) = self.stiffness {
            scale = scale.max((self.kt / k).sqrt());
        }
        let (center, spread) = self.initial.reach();
        center + ESCAPE_FACTOR * scale.max(spread) * ((2 * self.config_dim()) as f64).sqrt()
    }
}

/// Symplectic Euler: momenta first with the old positions, then positions
/// with the new momenta. Positions receive no noise.
pub fn simulate_polymer(spec: &PolymerSpec, cfg: &EnsembleConfig) -> Result<PathEnsemble> {
    let d = spec.config_dim();
    let (steps, n_times) = cfg.validate()?;
    let radius = cfg.escape_radius.unwrap_or_else(|| spec.default_radius());
    let sqdt = cfg.dt.sqrt();
    let damping = spec.gamma + spec.alpha_c;
    let diagonal = spec.noise == DMatrix::from_diagonal(&spec.noise.diagonal());
    let sample = spec.initial.sampler();
    simulate_paths(cfg, 2 * d, n_times, |path, rng, out| {
        let mut x = vec![0.0; 2 * d];
        sample(rng, &mut x);
        out[..2 * d].copy_from_slice(&x);
        let mut z = DVector::zeros(d);
        for k in 0..steps {
            let force = spec.potential.gradient(&x[..d]);
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            let kick: DVector<f64> = if diagonal {
                z.component_mul(&spec.noise.diagonal())
            } else {
                &spec.noise * &z
            };
            for i in 0..d {
                let v = x[d + i] / spec.mass_of(i);
                x[d + i] += (-force[i] - damping * v) * cfg.dt + kick[i] * sqdt;
            }
            for i in 0..d {
                x[i] += x[d + i] / spec.mass_of(i) * cfg.dt;
            }
            check_escape(&x, radius, path, k + 1)?;
            if (k + 1) % cfg.record_every == 0 {
                let r = (k + 1) / cfg.record_every;
                out[r * 2 * d..(r + 1) * 2 * d].copy_from_slice(&x);
            }
        }
        Ok(())
    })
}

/// Equipartition temperature `⟨m_k |V_k|²⟩/3`, averaged over blocks and over
/// the recorded times in `[window.0, window.1]`; the standard error treats
/// paths as independent replicas.
pub fn kinetic_temperature(ensemble: &PathEnsemble, spec: &PolymerSpec, window: (f64, f64)) -> Result<Estimate> {
    let d = spec.config_dim();
    if ensemble.dim() != 2 * d {
        return Err(Error::InvalidArgument("ensemble is not a phase-space ensemble of this polymer".into()));
    }
    let times = ensemble.times();
    let (a, b) = window;
    let horizon = *times.last().unwrap();
    let slack = 1e-9 * horizon.max(1.0);
    if !(a <= b && a >= -slack && b <= horizon + slack) {
        return Err(Error::InvalidArgument(format!("window [{a}, {b}] outside the horizon [0, {horizon}]")));
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= a - slack && times[k] <= b + slack).collect();
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!("no recorded times in [{a}, {b}]")));
    }
    let per_path: Vec<f64> = (0..ensemble.n_paths())
        .map(|p| {
            let total: f64 = idx
                .iter()
                .map(|&k| {
                    let x = ensemble.state(p, k);
                    (0..d).map(|i| x[d + i].powi(2) / spec.mass_of(i)).sum::<f64>()
                })
                .sum();
            total / (idx.len() * d) as f64
        })
        .collect();
    Ok(Estimate::from_samples(&per_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantilever(alpha_c: f64) -> PolymerSpec {
        PolymerSpec::harmonic(vec![1.0], 1.0, 1.0, alpha_c, 1.0).unwrap()
    }

    #[test]
    fn fluctuation_dissipation_enforced() {
        let spec = cantilever(0.0);
        let d = spec.config_dim();
        assert!(spec.clone().with_noise(DMatrix::identity(d, d)).is_err());
        // any orthogonal rotation of the default noise is admissible
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let gamma = DMatrix::from_iterator(3, 3, rot.matrix().iter().copied()) * 2f64.sqrt();
        assert!(spec.with_noise(gamma).is_ok());
    }

    #[test]
    fn equilibrium_equipartition() {
        let cfg = EnsembleConfig::new(2000, 1e-2, 40.0, 3).record_every(10);
        let spec = cantilever(0.0);
        let e = simulate_polymer(&spec, &cfg).unwrap();
        let t = kinetic_temperature(&e, &spec, (10.0, 40.0)).unwrap();
        assert!((t.value - 1.0).abs() < 0.02, "{t:?}");
    }

    #[test]
    fn feedback_cools() {
        let cfg = EnsembleConfig::new(1000, 1e-2, 30.0, 4).record_every(10);
        let spec = cantilever(1.0);
        let e = simulate_polymer(&spec, &cfg).unwrap();
        let t = kinetic_temperature(&e, &spec, (10.0, 30.0)).unwrap();
        assert!(t.value + 3.0 * t.se < 1.0, "{t:?}");
    }

    #[test]
    fn hamiltonian_limit_conserves_energy() {
        let dt = 1e-3;
        let spec = PolymerSpec::harmonic(vec![2.0, 0.5], 3.0, 0.0, 0.0, 1.0)
            .unwrap()
            .frictionless()
            .with_initial(InitialDistribution::Point(vec![1.0, 0.0, -0.5, 0.2, 0.1, 0.0, 0.0, 1.0, 0.3, -0.4, 0.0, 0.2]))
            .unwrap();
        let e = simulate_polymer(&spec, &EnsembleConfig::new(1, dt, 1.0, 0)).unwrap();
        let energies: Vec<f64> = (0..e.n_times()).map(|k| spec.energy(e.state(0, k))).collect();
        let step_change = energies.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(step_change < 10.0 * dt * dt * energies[0], "{step_change}");
        let drift = energies.iter().map(|h| (h - energies[0]).abs()).fold(0.0, f64::max);
        assert!(drift < 10.0 * dt * energies[0]);
    }

    #[test]
    fn frozen_ensemble_has_zero_temperature() {
        let spec = cantilever(0.0).frictionless();
        let e = simulate_polymer(&spec, &EnsembleConfig::new(5, 0.1, 1.0, 0)).unwrap();
        let t = kinetic_temperature(&e, &spec, (0.0, 1.0)).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(kinetic_temperature(&e, &spec, (0.5, 2.0)).is_err());
    }
}
