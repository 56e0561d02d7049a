//! Plain-text CSV form of grid densities.
//!
//! ```text
//! # grid: lo hi cells [lo hi cells ...]
//! x0[,x1...],value
//! ```
//! Floats are written with 17 significant digits.

use std::fmt::Write as _;

use super::density::GridDensity;
use super::grid::{Axis, Grid};
use crate::error::{Error, Result};

/// Float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_density_csv(rho: &GridDensity) -> String {
    let grid = rho.grid();
    let mut out = String::from("# grid:");
    for a in grid.axes() {
        let _ = write!(out, " {} {} {}", fmt_f64(a.lo), fmt_f64(a.hi), a.cells);
    }
    out.push('\n');
    let mut x = vec![0.0; grid.dim()];
    for (i, v) in rho.values().iter().enumerate() {
        grid.center_into(i, &mut x);
        for c in &x {
            out.push_str(&fmt_f64(*c));
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn read_density_csv(text: &str) -> Result<GridDensity> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty density file".into()))?;
    let spec = header
        .strip_prefix("# grid:")
        .ok_or_else(|| Error::Parse("missing '# grid:' header".into()))?;
    let tokens: Vec<&str> = spec.split_whitespace().collect();
    if tokens.is_empty() || tokens.len() % 3 != 0 {
        return Err(Error::Parse("grid header needs lo hi cells per dimension".into()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    let axes = tokens
        .chunks(3)
        .map(|c| {
            let cells = c[2].parse::<usize>().map_err(|e| Error::Parse(format!("{:?}: {e}", c[2])))?;
            Ok(Axis::new(num(c[0])?, num(c[1])?, cells))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(axes)?;
    let n = grid.dim();
    let mut values = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(Error::Parse(format!("row {}: expected {} columns", row + 1, n + 1)));
        }
        values.push(num(fields[n])?);
    }
    GridDensity::new(grid, values)
}
