use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{masked_gradient, Grid, GridDensity, VectorFieldGrid, DENSITY_FLOOR};
use crate::sde::PathEnsemble;

/// Cells with fewer samples are reported but excluded from norms.
pub const MIN_COUNT: usize = 30;

const PATH_CHUNK: usize = 1024;

/// Cell-binned conditional mean velocity with per-cell counts and standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    grid: Grid,
    values: Vec<f64>,
    counts: Vec<usize>,
    se: Vec<f64>,
    centroids: Vec<f64>,
    min_count: usize,
}

impl DriftEstimate {
    /// Wraps per-cell data laid out `cell * dim + d`; centroids default to cell centers.
    pub fn new(grid: Grid, values: Vec<f64>, counts: Vec<usize>, se: Vec<f64>) -> Result<Self> {
        let n = grid.dim();
        if values.len() != grid.len() * n || se.len() != grid.len() * n || counts.len() != grid.len() {
            return Err(Error::InvalidArgument("drift estimate arrays do not match the grid".into()));
        }
        let centroids = (0..grid.len()).flat_map(|i| grid.center(i)).collect();
        Ok(Self { grid, values, counts, se, centroids, min_count: MIN_COUNT })
    }

    /// Exact field sampled at cell centers, with zero standard error.
    pub fn from_fn(grid: Grid, count: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let field = VectorFieldGrid::from_fn(grid.clone(), f)?;
        let n = grid.len();
        let d = grid.dim();
        Self::new(grid, field.data().to_vec(), vec![count; n], vec![0.0; n * d])
    }

    pub fn with_min_count(mut self, min_count: usize) -> Self {
        self.min_count = min_count;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn value(&self, cell: usize) -> &[f64] {
        let n = self.dim();
        &self.values[cell * n..(cell + 1) * n]
    }

    pub fn se(&self, cell: usize) -> &[f64] {
        let n = self.dim();
        &self.se[cell * n..(cell + 1) * n]
    }

    /// Mean sample position in the cell.
    pub fn centroid(&self, cell: usize) -> &[f64] {
        let n = self.dim();
        &self.centroids[cell * n..(cell + 1) * n]
    }

    pub fn count(&self, cell: usize) -> usize {
        self.counts[cell]
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn is_populated(&self, cell: usize) -> bool {
        self.counts[cell] >= self.min_count
    }

    pub fn populated(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&c| self.is_populated(c)).collect()
    }

    /// Value of the populated cell containing `x`.
    pub fn at(&self, x: &[f64]) -> Option<&[f64]> {
        self.grid.locate(x).filter(|&c| self.is_populated(c)).map(|c| self.value(c))
    }

    /// Nadaraya-Watson smoothing with a Gaussian kernel of per-axis width `h`
    /// over cell centers: count-weighted means of the cell values. Pairs with
    /// a kernel density estimate of the same bandwidth, whose continuity
    /// velocity this is. Counts become kernel-averaged counts.
    pub fn kernel_smoothed(&self, h: &[f64]) -> Result<Self> {
        let n = self.dim();
        if h.len() != n || h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("bandwidth must be positive per axis".into()));
        }
        let cells = self.grid.len();
        let mut den: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let mut num: Vec<f64> = (0..cells * n).map(|i| self.counts[i / n] as f64 * self.values[i]).collect();
        let mut var: Vec<f64> = (0..cells * n)
            .map(|i| {
                let c = self.counts[i / n] as f64;
                if c > 0.0 && self.se[i].is_finite() { (c * self.se[i]).powi(2) } else { 0.0 }
            })
            .collect();
        let mut avg = den.clone();
        for d in 0..n {
            let w = axis_kernel(self.grid.axis(d).cells, self.grid.spacing(d), h[d]);
            den = convolve(&self.grid, d, &den, 1, &w, false);
            avg = convolve(&self.grid, d, &avg, 1, &w, true);
            num = convolve(&self.grid, d, &num, n, &w, false);
            let w2: Vec<f64> = w.iter().map(|v| v * v).collect();
            var = convolve(&self.grid, d, &var, n, &w2, false);
        }
        let mut values = vec![0.0; cells * n];
        let mut se = vec![f64::NAN; cells * n];
        for c in 0..cells {
            if den[c] > 0.0 {
                for k in 0..n {
                    values[c * n + k] = num[c * n + k] / den[c];
                    se[c * n + k] = var[c * n + k].sqrt() / den[c];
                }
            }
        }
        Ok(Self {
            grid: self.grid.clone(),
            values,
            counts: avg.iter().map(|a| a.round() as usize).collect(),
            se,
            centroids: (0..cells).flat_map(|i| self.grid.center(i)).collect(),
            min_count: self.min_count,
        })
    }

    /// Grid field with zero in unpopulated cells.
    pub fn to_vector_field(&self) -> VectorFieldGrid {
        let n = self.dim();
        let mut data = vec![0.0; self.grid.len() * n];
        for c in self.populated() {
            data[c * n..(c + 1) * n].copy_from_slice(self.value(c));
        }
        VectorFieldGrid::from_data(self.grid.clone(), data).expect("populated cells hold finite means")
    }
}

/// Gaussian weights `exp(−(kΔ)²/2h²)` for offsets `k = 0, 1, ...` up to underflow or the axis length.
fn axis_kernel(cells: usize, dx: f64, h: f64) -> Vec<f64> {
    (0..cells).map(|k| (-0.5 * (k as f64 * dx / h).powi(2)).exp()).take_while(|w| *w > 0.0).collect()
}

/// Convolution along axis `d` of a field with `comps` components per cell;
/// `normalize` divides by the kernel mass that lies inside the grid.
fn convolve(grid: &Grid, d: usize, field: &[f64], comps: usize, w: &[f64], normalize: bool) -> Vec<f64> {
    let m = grid.axis(d).cells as isize;
    let s = grid.stride(d);
    let mut out = vec![0.0; field.len()];
    for cell in 0..grid.len() {
        let c = grid.coord(cell, d) as isize;
        let mut mass = 0.0;
        for (k, wk) in w.iter().enumerate() {
            for off in if k == 0 { vec![0isize] } else { vec![-(k as isize), k as isize] } {
                let j = c + off;
                if j < 0 || j >= m {
                    continue;
                }
                let src = (cell as isize + (j - c) * s as isize) as usize;
                mass += wk;
                for q in 0..comps {
                    out[cell * comps + q] += wk * field[src * comps + q];
                }
            }
        }
        if normalize && mass > 0.0 {
            for q in 0..comps {
                out[cell * comps + q] /= mass;
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

struct Accumulator {
    count: Vec<usize>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    pos: Vec<f64>,
}

impl Accumulator {
    fn new(cells: usize, n: usize) -> Self {
        Self { count: vec![0; cells], sum: vec![0.0; cells * n], sumsq: vec![0.0; cells * n], pos: vec![0.0; cells * n] }
    }

    fn merge(&mut self, other: Accumulator) {
        self.count.iter_mut().zip(other.count).for_each(|(a, b)| *a += b);
        for (a, b) in [(&mut self.sum, other.sum), (&mut self.sumsq, other.sumsq), (&mut self.pos, other.pos)] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

fn bin_increments(ens: &PathEnsemble, grid: &Grid, indices: Range<usize>, dir: Direction) -> Result<DriftEstimate> {
    let n = grid.dim();
    if ens.dim() != n {
        return Err(Error::GridMismatch);
    }
    if ens.n_times() < 2 {
        return Err(Error::InvalidArgument("drift estimation needs at least two recorded times".into()));
    }
    let (lo, hi) = match dir {
        Direction::Forward => (0, ens.n_times() - 1),
        Direction::Backward => (1, ens.n_times()),
    };
    if indices.is_empty() || indices.start < lo || indices.end > hi {
        return Err(Error::InvalidArgument(format!(
            "time indices {indices:?} outside the admissible range {lo}..{hi}"
        )));
    }
    let dt = ens.dt();
    let paths: Vec<usize> = (0..ens.n_paths()).collect();
    // fixed chunks keep the summation order independent of scheduling
    let partials: Vec<Accumulator> = paths
        .par_chunks(PATH_CHUNK)
        .map(|chunk| {
            let mut acc = Accumulator::new(grid.len(), n);
            for &p in chunk {
                for k in indices.clone() {
                    let x = ens.state(p, k);
                    let Some(cell) = grid.locate(x) else { continue };
                    let other = match dir {
                        Direction::Forward => ens.state(p, k + 1),
                        Direction::Backward => ens.state(p, k - 1),
                    };
                    acc.count[cell] += 1;
                    for d in 0..n {
                        let v = match dir {
                            Direction::Forward => (other[d] - x[d]) / dt,
                            Direction::Backward => (x[d] - other[d]) / dt,
                        };
                        acc.sum[cell * n + d] += v;
                        acc.sumsq[cell * n + d] += v * v;
                        acc.pos[cell * n + d] += x[d];
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Accumulator::new(grid.len(), n);
    for p in partials {
        total.merge(p);
    }
    let mut values = vec![0.0; grid.len() * n];
    let mut se = vec![f64::NAN; grid.len() * n];
    let mut centroids: Vec<f64> = (0..grid.len()).flat_map(|i| grid.center(i)).collect();
    for c in 0..grid.len() {
        let m = total.count[c];
        if m == 0 {
            continue;
        }
        let mf = m as f64;
        for d in 0..n {
            let i = c * n + d;
            let mean = total.sum[i] / mf;
            values[i] = mean;
            centroids[i] = total.pos[i] / mf;
            if m > 1 {
                let var = ((total.sumsq[i] - mf * mean * mean) / (mf - 1.0)).max(0.0);
                se[i] = (var / mf).sqrt();
            }
        }
    }
    Ok(DriftEstimate { grid: grid.clone(), values, counts: total.count, se, centroids, min_count: MIN_COUNT })
}

/// `β̂`: mean of `(x(t+Δ) − x(t))/Δ` over paths in each cell at `t_index`.
pub fn estimate_forward_drift(ens: &PathEnsemble, t_index: usize, grid: &Grid) -> Result<DriftEstimate> {
    bin_increments(ens, grid, t_index..t_index + 1, Direction::Forward)
}

/// `γ̂`: mean of `(x(t) − x(t−Δ))/Δ` over paths in each cell at `t_index`.
pub fn estimate_backward_drift(ens: &PathEnsemble, t_index: usize, grid: &Grid) -> Result<DriftEstimate> {
    bin_increments(ens, grid, t_index..t_index + 1, Direction::Backward)
}

/// `β̂` pooled over a range of time indices, for ensembles that are
/// stationary over that range.
pub fn estimate_forward_drift_pooled(ens: &PathEnsemble, indices: Range<usize>, grid: &Grid) -> Result<DriftEstimate> {
    bin_increments(ens, grid, indices, Direction::Forward)
}

/// `γ̂` pooled over a range of time indices.
pub fn estimate_backward_drift_pooled(ens: &PathEnsemble, indices: Range<usize>, grid: &Grid) -> Result<DriftEstimate> {
    bin_increments(ens, grid, indices, Direction::Backward)
}

fn same_grid(a: &DriftEstimate, b: &DriftEstimate) -> Result<()> {
    if a.grid.same_as(&b.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `v = (β + γ)/2` cell by cell; counts are the smaller of the two.
pub fn current_drift(beta: &DriftEstimate, gamma: &DriftEstimate) -> Result<DriftEstimate> {
    same_grid(beta, gamma)?;
    let values = beta.values.iter().zip(&gamma.values).map(|(b, g)| 0.5 * (b + g)).collect();
    let se = beta.se.iter().zip(&gamma.se).map(|(b, g)| 0.5 * b.hypot(*g)).collect();
    let counts = beta.counts.iter().zip(&gamma.counts).map(|(b, g)| *b.min(g)).collect();
    Ok(DriftEstimate {
        grid: beta.grid.clone(),
        values,
        counts,
        se,
        centroids: beta.centroids.clone(),
        min_count: beta.min_count.max(gamma.min_count),
    })
}

/// Weighted RMS of `β̂ − γ̂ − σ² ∇log p̂` over cells populated in both
/// estimates where `∇log p̂` has a central difference; weights are density
/// times count.
pub fn osmotic_residual(beta: &DriftEstimate, gamma: &DriftEstimate, density: &GridDensity, sigma2: f64) -> Result<f64> {
    same_grid(beta, gamma)?;
    let grid = density.grid();
    if !grid.same_as(&beta.grid) {
        return Err(Error::GridMismatch);
    }
    let valid: Vec<bool> = density.values().iter().map(|&v| v > DENSITY_FLOOR).collect();
    let logs: Vec<f64> = density.values().iter().zip(&valid).map(|(v, ok)| if *ok { v.ln() } else { 0.0 }).collect();
    let g = masked_gradient(grid, &logs, Some(&valid));
    let (mut num, mut den) = (0.0, 0.0);
    let central = |c: usize| {
        !grid.is_boundary(c) && (0..grid.dim()).all(|d| valid[c - grid.stride(d)] && valid[c + grid.stride(d)])
    };
    for c in 0..grid.len() {
        if !(valid[c] && beta.is_populated(c) && gamma.is_populated(c) && central(c)) {
            continue;
        }
        let r2: f64 = (0..grid.dim())
            .map(|d| (beta.value(c)[d] - gamma.value(c)[d] - sigma2 * g.component(c, d)).powi(2))
            .sum();
        let w = density.values()[c] * beta.count(c).min(gamma.count(c)) as f64;
        num += w * r2;
        den += w;
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { f64::NAN })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Paths `x_p(t) = x_p(0) + v t` on the times `0, 0.1, ..., 1`.
    fn transport(v: f64) -> PathEnsemble {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let n = 200;
        let mut data = Vec::new();
        for p in 0..n {
            let x0 = -1.0 + 2.0 * p as f64 / n as f64;
            data.extend(times.iter().map(|t| x0 + v * t));
        }
        PathEnsemble::new(n, 1, times, 0, data).unwrap()
    }

    #[test]
    fn deterministic_transport_is_exact() {
        let grid = Grid::uniform_1d(-2.0, 2.0, 8).unwrap();
        let e = transport(0.7);
        let b = estimate_forward_drift(&e, 3, &grid).unwrap();
        let g = estimate_backward_drift(&e, 3, &grid).unwrap();
        let v = current_drift(&b, &g).unwrap();
        for c in b.populated() {
            assert!((b.value(c)[0] - 0.7).abs() < 1e-12);
            assert!((g.value(c)[0] - 0.7).abs() < 1e-12);
            assert!((v.value(c)[0] - 0.7).abs() < 1e-12);
        }
        assert!(!b.populated().is_empty());
        let rho = GridDensity::uniform(grid.clone()).unwrap();
        assert!(osmotic_residual(&b, &g, &rho, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn index_ranges_are_checked() {
        let grid = Grid::uniform_1d(-2.0, 2.0, 8).unwrap();
        let e = transport(1.0);
        assert!(estimate_forward_drift(&e, 10, &grid).is_err());
        assert!(estimate_backward_drift(&e, 0, &grid).is_err());
        assert!(estimate_forward_drift_pooled(&e, 0..10, &grid).is_ok());
        assert!(estimate_backward_drift_pooled(&e, 1..11, &grid).is_ok());
    }

    #[test]
    fn synthetic_osmotic_identity() {
        let grid = Grid::uniform_1d(-5.0, 5.0, 200).unwrap();
        let rho = GridDensity::from_fn(grid.clone(), |x| (-0.5 * x[0] * x[0]).exp()).unwrap();
        let beta = DriftEstimate::from_fn(grid.clone(), 1000, |x| vec![-x[0]]).unwrap();
        let gamma = DriftEstimate::from_fn(grid.clone(), 1000, |x| vec![x[0]]).unwrap();
        // central differences of a quadratic log-density are exact
        assert!(osmotic_residual(&beta, &gamma, &rho, 2.0).unwrap() < 1e-8);
        let v = current_drift(&beta, &gamma).unwrap();
        assert!((0..grid.len()).all(|c| v.value(c)[0] == 0.0));
    }

    #[test]
    fn unpopulated_cells_are_flagged() {
        let grid = Grid::uniform_1d(-2.0, 2.0, 8).unwrap();
        let e = transport(0.0);
        let b = estimate_forward_drift(&e, 0, &grid).unwrap();
        // 200 points spread over [−1, 1): 50 per populated cell
        assert_eq!(b.populated().len(), 4);
        assert!(b.at(&[1.5]).is_none());
        assert!(b.at(&[0.5]).is_some());
        assert_eq!(b.clone().with_min_count(51).populated().len(), 0);
    }
}
