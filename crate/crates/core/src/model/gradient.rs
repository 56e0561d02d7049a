//! The discrete gradient shared by every grid functional.
//!
//! Central differences in the interior, one-sided differences at the box
//! boundary and next to excluded cells.

use super::density::{GridDensity, VectorFieldGrid};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Densities below this are treated as zero in log-bearing integrands.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Gradient of a cell-centered scalar field.
pub fn gradient(grid: &Grid, field: &[f64]) -> VectorFieldGrid {
    masked_gradient(grid, field, None)
}

/// Gradient of `field` using only cells where `valid` holds.
///
/// A valid cell with both neighbours valid gets a central difference; with one
/// valid neighbour a one-sided difference; with none the gradient is zero.
/// Invalid cells get zero.
pub fn masked_gradient(grid: &Grid, field: &[f64], valid: Option<&[bool]>) -> VectorFieldGrid {
    let n = grid.dim();
    let ok = |i: usize| valid.is_none_or(|v| v[i]);
    let mut data = vec![0.0; grid.len() * n];
    for cell in 0..grid.len() {
        if !ok(cell) {
            continue;
        }
        for d in 0..n {
            let h = grid.spacing(d);
            let s = grid.stride(d);
            let c = grid.coord(cell, d);
            let m = grid.axis(d).cells;
            let lo = (c > 0 && ok(cell - s)).then(|| cell - s);
            let hi = (c + 1 < m && ok(cell + s)).then(|| cell + s);
            data[cell * n + d] = match (lo, hi) {
                (Some(l), Some(r)) => (field[r] - field[l]) / (2.0 * h),
                (None, Some(r)) => (field[r] - field[cell]) / h,
                (Some(l), None) => (field[cell] - field[l]) / h,
                (None, None) => 0.0,
            };
        }
    }
    VectorFieldGrid::from_data(grid.clone(), data).expect("finite differences of finite data")
}

/// `∇ log ρ` together with the mask of cells above [`DENSITY_FLOOR`].
///
/// Fails if an interior cell is below the floor, since the log is undefined
/// there.
pub fn log_gradient(rho: &GridDensity) -> Result<(VectorFieldGrid, Vec<bool>)> {
    let grid = rho.grid();
    let valid: Vec<bool> = rho.values().iter().map(|&v| v > DENSITY_FLOOR).collect();
    if let Some(i) = (0..grid.len()).find(|&i| !valid[i] && !grid.is_boundary(i)) {
        return Err(Error::LogDensityUndefined(i));
    }
    let logs: Vec<f64> = rho.values().iter().zip(&valid).map(|(v, ok)| if *ok { v.ln() } else { 0.0 }).collect();
    Ok((masked_gradient(grid, &logs, Some(&valid)), valid))
}

/// `∇ log(ρ̃/ρ)` over cells where ρ̃ is above the floor.
///
/// Cells with ρ̃ below the floor are excluded; ρ must be positive wherever ρ̃
/// is retained.
pub fn log_ratio_gradient(rho_tilde: &GridDensity, rho: &GridDensity) -> Result<(VectorFieldGrid, Vec<bool>)> {
    let grid = rho_tilde.grid();
    if !grid.same_as(rho.grid()) {
        return Err(Error::GridMismatch);
    }
    let valid: Vec<bool> = rho_tilde.values().iter().map(|&v| v > DENSITY_FLOOR).collect();
    let mut logs = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if valid[i] {
            let r = rho.values()[i];
            if !(r > 0.0) {
                return Err(Error::LogDensityUndefined(i));
            }
            logs[i] = rho_tilde.values()[i].ln() - r.ln();
        }
    }
    Ok((masked_gradient(grid, &logs, Some(&valid)), valid))
}
