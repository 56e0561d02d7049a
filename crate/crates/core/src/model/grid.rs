//! Uniform rectangular grids.
//!
//! Cells are stored row-major: the last axis varies fastest.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Self {
        Self { lo, hi, cells }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        for (d, a) in axes.iter().enumerate() {
            if !(a.lo.is_finite() && a.hi.is_finite()) || a.hi <= a.lo {
                return Err(Error::InvalidGrid(format!(
                    "axis {d}: upper bound {} must exceed lower bound {}",
                    a.hi, a.lo
                )));
            }
            if a.cells < 2 {
                return Err(Error::InvalidGrid(format!("axis {d}: need at least 2 cells")));
            }
        }
        let mut strides = vec![1; axes.len()];
        for d in (0..axes.len() - 1).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].cells;
        }
        let len = axes.iter().map(|a| a.cells).product();
        Ok(Self { axes, strides, len })
    }

    pub fn uniform_1d(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::new(vec![Axis::new(lo, hi, cells)])
    }

    /// Hypercube `[lo, hi]^dim` with `cells` cells per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::new(vec![Axis::new(lo, hi, cells); dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.axes[d].spacing()
    }

    pub fn stride(&self, d: usize) -> usize {
        self.strides[d]
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn box_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.hi - a.lo).product()
    }

    /// Coordinate of cell `flat` along axis `d`.
    pub fn coord(&self, flat: usize, d: usize) -> usize {
        (flat / self.strides[d]) % self.axes[d].cells
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dim()).map(|d| self.coord(flat, d)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.center_into(flat, &mut x);
        x
    }

    pub fn center_into(&self, flat: usize, out: &mut [f64]) {
        for (d, o) in out.iter_mut().enumerate() {
            *o = self.axes[d].center(self.coord(flat, d));
        }
    }

    /// Cell on the outer layer of the box along any axis.
    pub fn is_boundary(&self, flat: usize) -> bool {
        (0..self.dim()).any(|d| {
            let c = self.coord(flat, d);
            c == 0 || c + 1 == self.axes[d].cells
        })
    }

    /// Cell containing `x`, or `None` outside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (d, a) in self.axes.iter().enumerate() {
            let u = (x[d] - a.lo) / a.spacing();
            if !(u >= 0.0 && u < a.cells as f64) {
                return None;
            }
            flat += (u as usize).min(a.cells - 1) * self.strides[d];
        }
        Some(flat)
    }

    /// First cell of every line running along axis `d`.
    pub fn line_starts(&self, d: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&f| self.coord(f, d) == 0)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.axes.len() == other.axes.len()
            && self.axes.iter().zip(&other.axes).all(|(a, b)| {
                a.cells == b.cells
                    && (a.lo - b.lo).abs() <= 1e-12 * (1.0 + a.lo.abs())
                    && (a.hi - b.hi).abs() <= 1e-12 * (1.0 + a.hi.abs())
            })
    }
}
