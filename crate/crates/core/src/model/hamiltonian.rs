use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

const GRADIENT_RTOL: f64 = 1e-5;

/// Energy landscape `H` with its gradient and the bath constants `kT`, `σ²`.
///
/// The overdamped drift is `−(σ²/2kT)∇H` and the equilibrium density is
/// proportional to `exp(−H/kT)`.
#[derive(Clone)]
pub struct HamiltonianSpec {
    dim: usize,
    energy: ScalarField,
    gradient: GradientField,
    kt: f64,
    sigma2: f64,
    quadratic: Option<DMatrix<f64>>,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("dim", &self.dim)
            .field("kt", &self.kt)
            .field("sigma2", &self.sigma2)
            .field("quadratic", &self.quadratic)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSpec {
    /// Validates `gradient` against central finite differences of `energy`
    /// at a fixed set of probe points.
    pub fn new(dim: usize, energy: ScalarField, gradient: GradientField, kt: f64, sigma2: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(kt > 0.0 && kt.is_finite()) {
            return Err(Error::InvalidArgument(format!("kT must be positive, got {kt}")));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma^2 must be nonnegative, got {sigma2}")));
        }
        let spec = Self { dim, energy, gradient, kt, sigma2, quadratic: None };
        spec.validate_gradient()?;
        Ok(spec)
    }

    /// `H(x) = ½ xᵀQx` with symmetric positive-definite `Q`.
    pub fn quadratic(q: DMatrix<f64>, kt: f64, sigma2: f64) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n || n == 0 {
            return Err(Error::InvalidArgument("Q must be square".into()));
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite("Q is not symmetric".into()));
        }
        let min = q.clone().symmetric_eigen().eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("Q has eigenvalue {min:.3e}")));
        }
        let qe = q.clone();
        let qg = q.clone();
        let energy: ScalarField = Arc::new(move |x: &[f64]| {
            let mut acc = 0.0;
            for i in 0..x.len() {
                for j in 0..x.len() {
                    acc += x[i] * qe[(i, j)] * x[j];
                }
            }
            0.5 * acc
        });
        let gradient: GradientField = Arc::new(move |x: &[f64]| {
            (0..x.len()).map(|i| (0..x.len()).map(|j| qg[(i, j)] * x[j]).sum()).collect()
        });
        let mut spec = Self::new(n, energy, gradient, kt, sigma2)?;
        spec.quadratic = Some(q);
        Ok(spec)
    }

    /// Scalar harmonic well `H(x) = k x²/2`.
    pub fn harmonic_1d(stiffness: f64, kt: f64, sigma2: f64) -> Result<Self> {
        Self::quadratic(DMatrix::from_element(1, 1, stiffness), kt, sigma2)
    }

    /// Flat landscape `H ≡ c`.
    pub fn constant(dim: usize, c: f64, kt: f64, sigma2: f64) -> Result<Self> {
        Self::new(dim, Arc::new(move |_| c), Arc::new(move |x: &[f64]| vec![0.0; x.len()]), kt, sigma2)
    }

    /// Symmetric quartic double well `H(x) = a(x² − b²)²` summed over axes.
    pub fn double_well(dim: usize, a: f64, b: f64, kt: f64, sigma2: f64) -> Result<Self> {
        Self::new(
            dim,
            Arc::new(move |x: &[f64]| x.iter().map(|xi| a * (xi * xi - b * b).powi(2)).sum()),
            Arc::new(move |x: &[f64]| x.iter().map(|xi| 4.0 * a * xi * (xi * xi - b * b)).collect()),
            kt,
            sigma2,
        )
    }

    fn validate_gradient(&self) -> Result<()> {
        const PROBES: [f64; 5] = [0.0, 0.37, -0.81, 1.3, -2.1];
        let n = self.dim;
        for k in 0..PROBES.len() {
            let x: Vec<f64> = (0..n).map(|d| PROBES[(k + d) % PROBES.len()]).collect();
            let g = (self.gradient)(&x);
            if g.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "gradient has {} components in dimension {n}",
                    g.len()
                )));
            }
            for d in 0..n {
                let h = 1e-5 * (1.0 + x[d].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[d] += h;
                xm[d] -= h;
                let (ep, em) = ((self.energy)(&xp), (self.energy)(&xm));
                if !(ep.is_finite() && em.is_finite()) {
                    return Err(Error::HamiltonianNotFinite(x));
                }
                let fd = (ep - em) / (2.0 * h);
                let scale = g[d].abs().max(fd.abs()).max(1.0);
                let rel_error = (fd - g[d]).abs() / scale;
                if rel_error > GRADIENT_RTOL {
                    return Err(Error::GradientMismatch { point: x, rel_error });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        (self.energy)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn energy_fn(&self) -> ScalarField {
        self.energy.clone()
    }

    pub fn gradient_fn(&self) -> GradientField {
        self.gradient.clone()
    }

    /// `Q` when the landscape was built by [`HamiltonianSpec::quadratic`].
    pub fn quadratic_form(&self) -> Option<&DMatrix<f64>> {
        self.quadratic.as_ref()
    }

    /// Uncontrolled overdamped drift `−(σ²/2kT)∇H(x)`.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let c = self.sigma2 / (2.0 * self.kt);
        (self.gradient)(x).into_iter().map(|g| -c * g).collect()
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma^2 must be nonnegative, got {sigma2}")));
        }
        Ok(Self { sigma2, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_gradient_rejected() {
        let r = HamiltonianSpec::new(
            1,
            Arc::new(|x: &[f64]| x[0] * x[0]),
            Arc::new(|x: &[f64]| vec![x[0]]),
            1.0,
            2.0,
        );
        assert!(matches!(r, Err(Error::GradientMismatch { .. })));
    }

    #[test]
    fn non_finite_energy_rejected() {
        let r = HamiltonianSpec::new(
            1,
            Arc::new(|x: &[f64]| if x[0] > 1.0 { f64::NAN } else { 0.0 }),
            Arc::new(|_: &[f64]| vec![0.0]),
            1.0,
            2.0,
        );
        assert!(matches!(r, Err(Error::HamiltonianNotFinite(_))));
    }

    #[test]
    fn builtins_pass_validation() {
        HamiltonianSpec::double_well(2, 0.5, 1.0, 1.0, 2.0).unwrap();
        HamiltonianSpec::constant(3, 4.0, 2.0, 1.0).unwrap();
        let h = HamiltonianSpec::harmonic_1d(1.0, 1.0, 2.0).unwrap();
        assert_eq!(h.drift(&[2.0]), vec![-2.0]);
        assert!(HamiltonianSpec::harmonic_1d(-1.0, 1.0, 2.0).is_err());
        assert!(HamiltonianSpec::harmonic_1d(1.0, 0.0, 2.0).is_err());
    }
}
