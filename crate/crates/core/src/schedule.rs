//! Scalar functions of time: constants, piecewise-linear tables, closures.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub enum Schedule {
    Constant(f64),
    Table(PiecewiseLinear),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Schedule::Table(t) => f.debug_tuple("Table").field(t).finish(),
            Schedule::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Schedule {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant(c) => *c,
            Schedule::Table(tab) => tab.at(t),
            Schedule::Function(f) => f(t),
        }
    }

    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Schedule::Function(Arc::new(f))
    }

    /// Knot times of a table schedule; empty otherwise.
    pub fn knots(&self) -> &[f64] {
        match self {
            Schedule::Table(t) => &t.times,
            _ => &[],
        }
    }

    /// `a·self + b`, evaluated lazily.
    pub fn affine(&self, a: f64, b: f64) -> Schedule {
        match self {
            Schedule::Constant(c) => Schedule::Constant(a * c + b),
            other => {
                let inner = other.clone();
                Schedule::function(move |t| a * inner.at(t) + b)
            }
        }
    }
}

impl From<f64> for Schedule {
    fn from(c: f64) -> Self {
        Schedule::Constant(c)
    }
}

/// Linear interpolation between knots, held constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument("table needs matching, nonempty columns".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("table times must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("table entries must be finite".into()));
        }
        Ok(Self { times, values })
    }

    /// Parses `t,alpha` rows; a non-numeric first line is taken as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::Parse(format!("line {}: expected two columns", lineno + 1))),
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    times.push(t);
                    values.push(v);
                }
                _ if times.is_empty() && lineno == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: not numeric", lineno + 1))),
            }
        }
        Self::new(times, values)
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.times.len() {
            return self.values[k - 1];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.values[k - 1] * (1.0 - w) + self.values[k] * w
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_holds() {
        let t = PiecewiseLinear::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, -1.0]).unwrap();
        assert_eq!(t.at(-1.0), 0.0);
        assert_eq!(t.at(0.5), 1.0);
        assert_eq!(t.at(1.5), 0.5);
        assert_eq!(t.at(9.0), -1.0);
    }

    #[test]
    fn csv_with_header() {
        let t = PiecewiseLinear::from_csv("t,alpha\n0,1\n1,3\n").unwrap();
        assert_eq!(t.at(0.5), 2.0);
        assert!(PiecewiseLinear::from_csv("0,1\nx,2\n").is_err());
        assert!(PiecewiseLinear::from_csv("1,1\n0,2\n").is_err());
    }

    #[test]
    fn affine_composition() {
        let s = Schedule::function(|t| t * t).affine(2.0, 1.0);
        assert_eq!(s.at(3.0), 19.0);
        assert!(matches!(Schedule::Constant(1.0).affine(2.0, 1.0), Schedule::Constant(c) if c == 3.0));
    }
}
