use nalgebra::Complex;

use super::operators::{c, commutator, CMatrix, DensityOperator, HamiltonianOperator, Spectrum};
use crate::error::{Error, Result};

/// Eigenvalues below this after a step are a positivity failure; above it they are clamped.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

/// Effective Hamiltonian and jump operators of a Lindblad generator.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSpec {
    hamiltonian: HamiltonianOperator,
    jumps: Vec<CMatrix>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: HamiltonianOperator, jumps: Vec<CMatrix>) -> Result<Self> {
        let n = hamiltonian.dim();
        for (k, l) in jumps.iter().enumerate() {
            if l.nrows() != n || l.ncols() != n {
                return Err(Error::InvalidArgument(format!("jump operator {k} is not {n}x{n}")));
            }
            if l.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidArgument(format!("jump operator {k} has non-finite entries")));
            }
        }
        Ok(Self { hamiltonian, jumps })
    }

    /// `L_k = √(γ/4) σ_k`, contracting the Bloch vector at rate `γ`.
    pub fn depolarizing(hamiltonian: HamiltonianOperator, gamma: f64) -> Result<Self> {
        let s = c((gamma / 4.0).sqrt());
        Self::new(hamiltonian, vec![super::pauli_x() * s, super::pauli_y() * s, super::pauli_z() * s])
    }

    /// `L = √γ σ_z`.
    pub fn dephasing(hamiltonian: HamiltonianOperator, gamma: f64) -> Result<Self> {
        Self::new(hamiltonian, vec![super::pauli_z() * c(gamma.sqrt())])
    }

    pub fn hamiltonian(&self) -> &HamiltonianOperator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[CMatrix] {
        &self.jumps
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Same dissipator with `H + ΔH`.
    pub fn perturbed(&self, delta_h: &HamiltonianOperator) -> Result<Self> {
        Ok(Self { hamiltonian: self.hamiltonian.plus(delta_h)?, jumps: self.jumps.clone() })
    }

    /// `½ Σ_k ([L_k ρ, L_k†] + [L_k, ρ L_k†])`.
    pub fn dissipator(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for l in &self.jumps {
            let ld = l.adjoint();
            out += commutator(&(l * rho), &ld) + commutator(l, &(rho * &ld));
        }
        out * c(0.5)
    }

    /// `−(i/ħ)[H, ρ] + dissipator(ρ)`.
    pub fn generator(&self, rho: &CMatrix) -> CMatrix {
        let h = &self.hamiltonian;
        commutator(h.matrix(), rho) * Complex::new(0.0, -1.0 / h.hbar()) + self.dissipator(rho)
    }
}

/// `U ρ₀ U†` with `U = exp(−iHt/ħ)`.
pub fn evolve_closed(h: &HamiltonianOperator, rho0: &DensityOperator, t: f64) -> Result<DensityOperator> {
    if h.dim() != rho0.dim() {
        return Err(Error::InvalidArgument("hamiltonian and state dimensions differ".into()));
    }
    let u = h.spectrum().apply(|e| Complex::new(0.0, -e * t / h.hbar()).exp());
    let m = &u * rho0.matrix() * u.adjoint();
    Ok(DensityOperator::from_trusted((&m + m.adjoint()) * c(0.5)))
}

/// `e^{−βH}/Z`, computed with the ground energy shifted to zero.
pub fn gibbs_state(h: &HamiltonianOperator, beta: f64) -> Result<DensityOperator> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
    }
    let spec = h.spectrum();
    let e0 = spec.min();
    let z: f64 = spec.values.iter().map(|e| (-beta * (e - e0)).exp()).sum();
    Ok(DensityOperator::from_trusted(spec.apply(|e| c((-beta * (e - e0)).exp() / z))))
}

#[derive(Debug, Clone)]
pub struct LindbladTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    /// Largest entrywise change made by the positivity projection.
    pub max_projection_residue: f64,
}

fn rk4(spec: &LindbladSpec, rho: &CMatrix, dt: f64) -> CMatrix {
    let half = c(0.5 * dt);
    let k1 = spec.generator(rho);
    let k2 = spec.generator(&(rho + &k1 * half));
    let k3 = spec.generator(&(rho + &k2 * half));
    let k4 = spec.generator(&(rho + &k3 * c(dt)));
    rho + (k1 + (k2 + k3) * c(2.0) + k4) * c(dt / 6.0)
}

/// Hermitizes, clamps small negative eigenvalues and restores unit trace.
fn project(raw: &CMatrix, t: f64, dt: f64) -> Result<(CMatrix, f64)> {
    let herm = (raw + raw.adjoint()) * c(0.5);
    let spec = Spectrum::of(&herm);
    let min = spec.min();
    if min < POSITIVITY_FLOOR {
        return Err(Error::QuantumPositivity { eigenvalue: min, t, suggested_dt: dt / 2.0 });
    }
    let mut m = if min < 0.0 { spec.apply(|l| c(l.max(0.0))) } else { herm };
    let tr = m.trace().re;
    m /= c(tr);
    let residue = (&m - raw).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok((m, residue))
}

/// Fixed-step RK4 integration of the Lindblad equation, every step recorded.
pub fn lindblad_evolve(spec: &LindbladSpec, rho0: &DensityOperator, t1: f64, dt: f64) -> Result<LindbladTrajectory> {
    lindblad_evolve_recorded(spec, rho0, t1, dt, 1)
}

pub fn lindblad_evolve_recorded(
    spec: &LindbladSpec,
    rho0: &DensityOperator,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<LindbladTrajectory> {
    if spec.dim() != rho0.dim() {
        return Err(Error::InvalidArgument("generator and state dimensions differ".into()));
    }
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be positive".into()));
    }
    let steps = crate::fokker_planck::step_count(0.0, t1, dt)?;
    let mut rho = rho0.matrix().clone();
    let mut traj = LindbladTrajectory { times: vec![0.0], states: vec![rho0.clone()], max_projection_residue: 0.0 };
    for k in 0..steps {
        let t = (k + 1) as f64 * dt;
        let (next, residue) = project(&rk4(spec, &rho, dt), t, dt)?;
        traj.max_projection_residue = traj.max_projection_residue.max(residue);
        rho = next;
        if (k + 1) % record_every == 0 || k + 1 == steps {
            traj.times.push(t);
            traj.states.push(DensityOperator::from_trusted(rho.clone()));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{pauli_x, pauli_z, quantum_relative_entropy};

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + a.adjoint()) * c(0.5)
    }

    fn random_state(n: usize, seed: u64) -> DensityOperator {
        let a = random_hermitian(n, seed);
        let m = &a * &a + CMatrix::identity(n, n) * c(0.05);
        let tr = m.trace();
        DensityOperator::new(m / tr).unwrap()
    }

    #[test]
    fn precession_of_plus_state() {
        let h = HamiltonianOperator::new(pauli_z()).unwrap();
        let plus = DensityOperator::pure(&[c(1.0), c(1.0)]).unwrap();
        let rho = evolve_closed(&h, &plus, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((rho.matrix()[(0, 1)] - c(-0.5)).norm() < 1e-12);
        let rho = evolve_closed(&h, &plus, 0.3).unwrap();
        assert!((rho.matrix()[(0, 1)] - Complex::new(0.0, -0.6).exp() * c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn unitary_invariants() {
        for seed in 0..5 {
            let h = HamiltonianOperator::new(random_hermitian(4, seed)).unwrap();
            let rho0 = random_state(4, 100 + seed);
            let rho = evolve_closed(&h, &rho0, 1.0).unwrap();
            assert!((rho.purity() - rho0.purity()).abs() < 1e-10);
            assert!((rho.von_neumann_entropy() - rho0.von_neumann_entropy()).abs() < 1e-10);
            for (a, b) in rho.eigenvalues().iter().zip(rho0.eigenvalues()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn commuting_state_is_frozen() {
        let h = HamiltonianOperator::from_real_diagonal(&[1.0, -0.5, 2.0]).unwrap();
        let rho0 = DensityOperator::diagonal(&[0.2, 0.5, 0.3]).unwrap();
        for t in [0.1, 1.0, 17.0] {
            assert!(evolve_closed(&h, &rho0, t).unwrap().distance(&rho0) < 1e-14);
        }
    }

    #[test]
    fn gibbs_values() {
        let h = HamiltonianOperator::from_real_diagonal(&[1.0, -1.0]).unwrap();
        let g = gibbs_state(&h, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((g.matrix()[(0, 0)].re - (1.0 / e) / (1.0 / e + e)).abs() < 1e-15);
        assert!((g.matrix()[(0, 0)].re - 0.11920).abs() < 1e-5);
        assert!(gibbs_state(&h, 0.0).unwrap().distance(&DensityOperator::maximally_mixed(2).unwrap()) < 1e-15);
        let cold = gibbs_state(&h, 50.0).unwrap();
        assert!(cold.distance(&DensityOperator::diagonal(&[0.0, 1.0]).unwrap()) < 1e-6);
        let hr = HamiltonianOperator::new(random_hermitian(3, 9)).unwrap();
        let gr = gibbs_state(&hr, 0.7).unwrap();
        assert!(commutator(hr.matrix(), gr.matrix()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn lindblad_without_jumps_is_unitary() {
        let h = HamiltonianOperator::new(random_hermitian(3, 4)).unwrap();
        let rho0 = random_state(3, 5);
        let spec = LindbladSpec::new(h.clone(), vec![]).unwrap();
        let traj = lindblad_evolve(&spec, &rho0, 1.0, 1e-3).unwrap();
        let exact = evolve_closed(&h, &rho0, 1.0).unwrap();
        assert!(traj.states.last().unwrap().distance(&exact) < 1e-8);
    }

    #[test]
    fn depolarizing_contracts_bloch_vector() {
        let gamma = 1.0;
        let spec = LindbladSpec::depolarizing(HamiltonianOperator::zero(2).unwrap(), gamma).unwrap();
        let mixed = DensityOperator::maximally_mixed(2).unwrap();
        assert!(spec.dissipator(&DensityOperator::diagonal(&[0.7, 0.3]).unwrap().matrix().clone())
            .iter()
            .zip((mixed.matrix() - DensityOperator::diagonal(&[0.7, 0.3]).unwrap().matrix()).iter())
            .all(|(a, b)| (a - b * c(gamma)).norm() < 1e-15));
        let rho0 = DensityOperator::diagonal(&[1.0, 0.0]).unwrap();
        let traj = lindblad_evolve(&spec, &rho0, 3.0, 1e-3).unwrap();
        let mut prev = f64::INFINITY;
        for (t, rho) in traj.times.iter().zip(&traj.states).skip(1) {
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-10);
            assert!((rho.bloch_vector().unwrap()[2] - (-gamma * t).exp()).abs() < 1e-10);
            let d = quantum_relative_entropy(rho, &mixed);
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn stationary_state_is_fixed() {
        let h = HamiltonianOperator::new(pauli_z() * c(0.7)).unwrap();
        let spec = LindbladSpec::dephasing(h, 0.5).unwrap();
        let bar = DensityOperator::diagonal(&[0.3, 0.7]).unwrap();
        let traj = lindblad_evolve(&spec, &bar, 2.0, 1e-2).unwrap();
        assert!(traj.states.iter().all(|s| s.distance(&bar) < 1e-8));
    }

    #[test]
    fn large_steps_lose_positivity() {
        let spec = LindbladSpec::new(HamiltonianOperator::zero(2).unwrap(), vec![pauli_x() * c(3.0)]).unwrap();
        let rho0 = DensityOperator::diagonal(&[1.0, 0.0]).unwrap();
        match lindblad_evolve(&spec, &rho0, 1.0, 0.5) {
            Err(Error::QuantumPositivity { suggested_dt, .. }) => assert_eq!(suggested_dt, 0.25),
            other => panic!("{other:?}"),
        }
    }
}
