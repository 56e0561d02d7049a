use nalgebra::{DMatrix, DVector};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Nonnegative density sampled at cell centers of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
    mass: f64,
}

impl GridDensity {
    /// Wraps raw cell values; the stored mass is the midpoint-rule total.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidDensity(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDensity(format!("cell {i} has value {v}")));
        }
        let mass = values.iter().sum::<f64>() * grid.cell_volume();
        Ok(Self { grid, values, mass })
    }

    /// Wraps raw values rescaled to unit mass.
    pub fn normalized(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mut d = Self::new(grid, values)?;
        if d.mass <= 0.0 {
            return Err(Error::InvalidDensity("zero total mass".into()));
        }
        let s = 1.0 / d.mass;
        d.values.iter_mut().for_each(|v| *v *= s);
        d.mass = d.values.iter().sum::<f64>() * d.grid.cell_volume();
        Ok(d)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.center_into(i, &mut x);
                f(&x)
            })
            .collect();
        Self::normalized(grid, values)
    }

    pub fn uniform(grid: Grid) -> Result<Self> {
        let v = 1.0 / grid.box_volume();
        Self::new(grid.clone(), vec![v; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Midpoint-rule total of the current values.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `∫ g ρ dx` by the midpoint rule.
    pub fn expectation(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let mut x = vec![0.0; self.grid.dim()];
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > 0.0 {
                self.grid.center_into(i, &mut x);
                acc += v * g(&x);
            }
        }
        acc * self.grid.cell_volume()
    }

    pub fn mean(&self) -> Vec<f64> {
        let m = self.total();
        (0..self.grid.dim()).map(|d| self.expectation(|x| x[d]) / m).collect()
    }

    /// Covariance about the mean, row-major `n × n`.
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.grid.dim();
        let mu = self.mean();
        let m = self.total();
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let c = self.expectation(|x| (x[a] - mu[a]) * (x[b] - mu[b])) / m;
                out[a * n + b] = c;
                out[b * n + a] = c;
            }
        }
        out
    }

    pub fn sup_distance(&self, other: &GridDensity) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidDensity("negative or NaN cell".into()));
        }
        if (self.total() - self.mass).abs() > 1e-8 {
            return Err(Error::InvalidDensity(format!(
                "mass drifted from {} to {}",
                self.mass,
                self.total()
            )));
        }
        Ok(())
    }
}

/// One vector per grid cell, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldGrid {
    grid: Grid,
    data: Vec<f64>,
}

impl VectorFieldGrid {
    pub fn zeros(grid: Grid) -> Self {
        let data = vec![0.0; grid.len() * grid.dim()];
        Self { grid, data }
    }

    pub fn from_data(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() * grid.dim() {
            return Err(Error::InvalidArgument(format!(
                "vector field needs {} entries, got {}",
                grid.len() * grid.dim(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("vector field has non-finite entries".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let n = grid.dim();
        let mut data = Vec::with_capacity(grid.len() * n);
        let mut x = vec![0.0; n];
        for i in 0..grid.len() {
            grid.center_into(i, &mut x);
            let v = f(&x);
            if v.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "field returned {} components in dimension {n}",
                    v.len()
                )));
            }
            data.extend_from_slice(&v);
        }
        Self::from_data(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, cell: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.data[cell * n..(cell + 1) * n]
    }

    pub fn at_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = self.grid.dim();
        &mut self.data[cell * n..(cell + 1) * n]
    }

    pub fn component(&self, cell: usize, d: usize) -> f64 {
        self.data[cell * self.grid.dim() + d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &VectorFieldGrid, b: f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid.clone(), data })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid.clone(), data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Multivariate normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidArgument("covariance shape does not match mean".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite(format!("covariance asymmetric by {asym:.3e}")));
        }
        let eig = cov.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {min:.3e}")));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("cholesky failed".into()))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = chol.inverse();
        Ok(Self { mean, cov, precision, log_det })
    }

    pub fn scalar(mean: f64, variance: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn isotropic(mean: &[f64], variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(DVector::from_column_slice(mean), DMatrix::identity(n, n) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        let q = d.dot(&(&self.precision * &d));
        -0.5 * (q + self.log_det + self.dim() as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `∇ log N(x) = −P⁻¹(x − m)`.
    pub fn grad_log_pdf(&self, x: &[f64]) -> Vec<f64> {
        let d = DVector::from_column_slice(x) - &self.mean;
        (-(&self.precision * d)).iter().copied().collect()
    }

    /// Sampled on `grid` and renormalized to unit grid mass.
    pub fn on_grid(&self, grid: &Grid) -> Result<GridDensity> {
        GridDensity::from_fn(grid.clone(), |x| self.pdf(x))
    }

    /// Closed-form `D(self ‖ other)`.
    pub fn kl_divergence(&self, other: &GaussianDensity) -> f64 {
        let n = self.dim() as f64;
        let dm = &other.mean - &self.mean;
        let tr = (&other.precision * &self.cov).trace();
        0.5 * (tr + dm.dot(&(&other.precision * &dm)) - n + other.log_det - self.log_det)
    }
}
