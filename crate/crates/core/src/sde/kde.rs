use std::ops::Range;

use rayon::prelude::*;

use super::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::model::{Grid, GridDensity};

/// Fraction of samples that must fall inside the grid.
pub const MIN_COVERAGE: f64 = 0.999;

/// Kernels are truncated where they underflow, so the estimate is positive
/// wherever a double can say so.
const CUTOFF: f64 = 37.0;
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule per axis, never narrower than the grid spacing.
    Auto,
    Fixed(f64),
}

/// Per-axis Silverman bandwidth `σ_d (4/((n+2)N))^{1/(n+4)}` of the ensemble at `t_index`.
pub fn silverman_bandwidth(ensemble: &PathEnsemble, t_index: usize) -> Vec<f64> {
    let samples: Vec<&[f64]> = ensemble.slice(t_index).collect();
    silverman(&samples, ensemble.dim())
}

fn silverman(samples: &[&[f64]], n: usize) -> Vec<f64> {
    let count = samples.len() as f64;
    let factor = (4.0 / ((n as f64 + 2.0) * count)).powf(1.0 / (n as f64 + 4.0));
    (0..n)
        .map(|d| {
            if samples.len() < 2 {
                return 0.0;
            }
            let mean = samples.iter().map(|x| x[d]).sum::<f64>() / count;
            let var = samples.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / (count - 1.0);
            var.sqrt() * factor
        })
        .collect()
}

/// Gaussian kernel estimate at cell centers. Each sample carries mass `1/N`
/// after its kernel is normalized over the grid cells it reaches.
pub fn estimate_density(
    ensemble: &PathEnsemble,
    t_index: usize,
    grid: &Grid,
    bandwidth: Bandwidth,
) -> Result<GridDensity> {
    estimate_density_pooled(ensemble, t_index..t_index + 1, grid, bandwidth)
}

/// Kernel estimate from the states at every time index in `indices`, for
/// ensembles that are stationary over that range.
pub fn estimate_density_pooled(
    ensemble: &PathEnsemble,
    indices: Range<usize>,
    grid: &Grid,
    bandwidth: Bandwidth,
) -> Result<GridDensity> {
    let n = grid.dim();
    if ensemble.dim() != n {
        return Err(Error::GridMismatch);
    }
    if indices.is_empty() || indices.end > ensemble.n_times() {
        return Err(Error::InvalidArgument(format!("time indices {indices:?} out of range")));
    }
    let all: Vec<&[f64]> =
        (0..ensemble.n_paths()).flat_map(|p| indices.clone().map(move |k| ensemble.state(p, k))).collect();
    let h: Vec<f64> = match bandwidth {
        Bandwidth::Auto => silverman(&all, n)
            .into_iter()
            .enumerate()
            .map(|(d, h)| h.max(grid.spacing(d)))
            .collect(),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => vec![h; n],
        Bandwidth::Fixed(h) => return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}"))),
    };
    let samples: Vec<&[f64]> = all.iter().copied().filter(|x| grid.locate(x).is_some()).collect();
    let escaped = 1.0 - samples.len() as f64 / all.len() as f64;
    if escaped > 1.0 - MIN_COVERAGE {
        return Err(Error::Coverage { escaped_fraction: escaped });
    }
    // fixed chunking keeps the summation order, hence the output, deterministic
    let partials: Vec<Vec<f64>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len()];
            let mut weights: Vec<Vec<f64>> = vec![Vec::new(); n];
            let mut first = vec![0usize; n];
            for x in chunk {
                for d in 0..n {
                    axis_weights(grid, d, x[d], h[d], &mut first[d], &mut weights[d]);
                }
                deposit(grid, &first, &weights, &mut acc);
            }
            acc
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    for p in partials {
        values.iter_mut().zip(p).for_each(|(v, a)| *v += a);
    }
    GridDensity::normalized(grid.clone(), values)
}

/// Normalized kernel weights along axis `d` over the cells within the cutoff.
fn axis_weights(grid: &Grid, d: usize, x: f64, h: f64, first: &mut usize, w: &mut Vec<f64>) {
    let a = grid.axis(d);
    let dx = a.spacing();
    let lo = (((x - CUTOFF * h - a.lo) / dx).floor().max(0.0)) as usize;
    let hi = ((((x + CUTOFF * h - a.lo) / dx).ceil()) as usize).min(a.cells);
    *first = lo;
    w.clear();
    w.extend((lo..hi).map(|i| {
        let z = (a.center(i) - x) / h;
        (-0.5 * z * z).exp()
    }));
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|v| *v /= s);
    } else {
        // kernel far narrower than a cell: all mass to the containing cell
        let own = (((x - a.lo) / dx) as usize).min(a.cells - 1);
        w.iter_mut().enumerate().for_each(|(i, v)| *v = if lo + i == own { 1.0 } else { 0.0 });
    }
}

/// Adds the tensor product of the axis weights into `acc`.
fn deposit(grid: &Grid, first: &[usize], weights: &[Vec<f64>], acc: &mut [f64]) {
    let n = grid.dim();
    let mut idx = vec![0usize; n];
    loop {
        let mut w = 1.0;
        let mut flat = 0;
        for d in 0..n {
            w *= weights[d][idx[d]];
            flat += (first[d] + idx[d]) * grid.stride(d);
        }
        acc[flat] += w;
        let mut d = 0;
        loop {
            if d == n {
                return;
            }
            idx[d] += 1;
            if idx[d] < weights[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}
