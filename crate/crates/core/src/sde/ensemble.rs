use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default escape radius in units of the equilibrium spread.
pub const ESCAPE_FACTOR: f64 = 50.0;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean and standard error of independent samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Self { value: mean, se: f64::NAN };
        }
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { value: mean, se: (var / n).sqrt() }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Distribution of the initial state.
#[derive(Debug, Clone)]
pub enum InitialDistribution {
    Point(Vec<f64>),
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
}

impl InitialDistribution {
    pub fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.clone().cholesky().is_none() || cov.nrows() != mean.len() {
            return Err(Error::NotPositiveDefinite("initial covariance".into()));
        }
        Ok(Self::Gaussian { mean, cov })
    }

    pub fn scalar_gaussian(mean: f64, variance: f64) -> Result<Self> {
        Self::gaussian(DVector::from_element(1, mean), DMatrix::from_element(1, 1, variance))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Point(x) => x.len(),
            Self::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Distance of the center from the origin plus the largest standard deviation.
    pub(crate) fn reach(&self) -> (f64, f64) {
        match self {
            Self::Point(x) => (x.iter().map(|v| v * v).sum::<f64>().sqrt(), 0.0),
            Self::Gaussian { mean, cov } => (mean.norm(), cov.clone().symmetric_eigen().eigenvalues.max().sqrt()),
        }
    }

    pub(crate) fn sampler(&self) -> impl Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + '_ {
        let chol = match self {
            Self::Gaussian { cov, .. } => Some(cov.clone().cholesky().expect("checked at construction").l()),
            Self::Point(_) => None,
        };
        move |rng, out| match self {
            Self::Point(x) => out.copy_from_slice(x),
            Self::Gaussian { mean, .. } => {
                let l = chol.as_ref().unwrap();
                let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
                for i in 0..mean.len() {
                    out[i] = mean[i] + (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>();
                }
            }
        }
    }
}

/// Ensemble size, horizon and recording settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n: usize,
    pub dt: f64,
    pub t1: f64,
    pub seed: u64,
    /// Keep every `record_every`-th step (and the initial state).
    pub record_every: usize,
    /// Abort when a state leaves this ball; `None` picks a default from the model.
    pub escape_radius: Option<f64>,
}

impl EnsembleConfig {
    pub fn new(n: usize, dt: f64, t1: f64, seed: u64) -> Self {
        Self { n, dt, t1, seed, record_every: 1, escape_radius: None }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn escape_radius(mut self, r: f64) -> Self {
        self.escape_radius = Some(r);
        self
    }

    pub(crate) fn validate(&self) -> Result<(usize, usize)> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one trajectory".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be positive".into()));
        }
        let steps = crate::fokker_planck::step_count(0.0, self.t1, self.dt)?;
        if steps % self.record_every != 0 {
            return Err(Error::InvalidArgument(format!(
                "record_every = {} does not divide {steps} steps",
                self.record_every
            )));
        }
        Ok((steps, steps / self.record_every + 1))
    }
}

/// Trajectories sampled on a common uniform time grid.
///
/// States are stored trajectory-major: all recorded times of path 0, then path 1, ...
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    n_paths: usize,
    dim: usize,
    times: Vec<f64>,
    dt: f64,
    seed: u64,
    data: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(n_paths: usize, dim: usize, times: Vec<f64>, seed: u64, data: Vec<f64>) -> Result<Self> {
        if n_paths == 0 || dim == 0 || times.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        if data.len() != n_paths * times.len() * dim {
            return Err(Error::InvalidArgument("ensemble data has the wrong length".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ensemble has non-finite entries".into()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
            return Err(Error::InvalidArgument("ensemble times are not uniform".into()));
        }
        Ok(Self { n_paths, dim, times, dt, seed, data })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Spacing of the recorded times.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn state(&self, path: usize, t_index: usize) -> &[f64] {
        let k = (path * self.times.len() + t_index) * self.dim;
        &self.data[k..k + self.dim]
    }

    /// States of every path at one time index.
    pub fn slice(&self, t_index: usize) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_paths).map(move |p| self.state(p, t_index))
    }

    pub fn mean(&self, t_index: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for x in self.slice(t_index) {
            m.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= self.n_paths as f64);
        m
    }

    /// Unbiased sample covariance, row-major.
    pub fn covariance(&self, t_index: usize) -> Vec<f64> {
        let n = self.dim;
        let mu = self.mean(t_index);
        let mut c = vec![0.0; n * n];
        for x in self.slice(t_index) {
            for a in 0..n {
                for b in 0..n {
                    c[a * n + b] += (x[a] - mu[a]) * (x[b] - mu[b]);
                }
            }
        }
        let denom = (self.n_paths as f64 - 1.0).max(1.0);
        c.iter_mut().for_each(|v| *v /= denom);
        c
    }

    /// Sample mean of component `d` with its standard error.
    pub fn mean_estimate(&self, t_index: usize, d: usize) -> Estimate {
        let xs: Vec<f64> = self.slice(t_index).map(|x| x[d]).collect();
        Estimate::from_samples(&xs)
    }

    /// Sample variance of component `d`, with the standard error of the
    /// variance estimator from the fourth central moment.
    pub fn variance_estimate(&self, t_index: usize, d: usize) -> Estimate {
        let xs: Vec<f64> = self.slice(t_index).map(|x| x[d]).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        Estimate { value: m2 * n / (n - 1.0), se: ((m4 - m2 * m2) / n).sqrt() }
    }
}

/// Runs `n` independent paths, each with its own counter-based stream of
/// the master seed, and assembles them in path order.
pub(crate) fn simulate_paths<F>(cfg: &EnsembleConfig, dim: usize, n_times: usize, path: F) -> Result<PathEnsemble>
where
    F: Fn(usize, &mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    let mut data = vec![0.0; cfg.n * n_times * dim];
    let results: Vec<Result<()>> = data
        .par_chunks_mut(n_times * dim)
        .enumerate()
        .map(|(p, out)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(p as u64);
            path(p, &mut rng, out)
        })
        .collect();
    // report the lowest failing index regardless of scheduling
    results.into_iter().collect::<Result<Vec<()>>>()?;
    let times = (0..n_times).map(|k| (k * cfg.record_every) as f64 * cfg.dt).collect();
    PathEnsemble::new(cfg.n, dim, times, cfg.seed, data)
}

pub(crate) fn check_escape(x: &[f64], radius: f64, trajectory: usize, step: usize) -> Result<()> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2.is_finite() && r2 <= radius * radius {
        Ok(())
    } else {
        Err(Error::TrajectoryDivergence { trajectory, step, radius })
    }
}
