//! Numerical certificate that boundary terms of the integration by parts vanish.

use crate::error::{Error, Result};
use crate::model::{GridDensity, VectorFieldGrid};

/// Boundary terms below this count as decayed.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    /// max over boundary cells of `|f| ρ̃`
    pub reference_flux: f64,
    /// max over boundary cells of `|f̃| ρ̃`
    pub flux: f64,
    /// max over boundary cells of `|f̃| ρ̃ |log(ρ̃/ρ)|`
    pub log_flux: f64,
    pub pass: bool,
}

impl BoundaryReport {
    pub fn max_term(&self) -> f64 {
        self.reference_flux.max(self.flux).max(self.log_flux)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Checks the decay of `f ρ̃`, `f̃ ρ̃` and `f̃ ρ̃ log(ρ̃/ρ)` on the outer cell layer.
pub fn check_boundary_decay(
    rho_tilde: &GridDensity,
    rho: &GridDensity,
    f_tilde: &VectorFieldGrid,
    f: &VectorFieldGrid,
) -> Result<BoundaryReport> {
    let grid = rho_tilde.grid();
    if !(grid.same_as(rho.grid()) && grid.same_as(f_tilde.grid()) && grid.same_as(f.grid())) {
        return Err(Error::GridMismatch);
    }
    let (mut reference_flux, mut flux, mut log_flux) = (0.0f64, 0.0f64, 0.0f64);
    for i in (0..grid.len()).filter(|&i| grid.is_boundary(i)) {
        let rt = rho_tilde.values()[i];
        if rt == 0.0 {
            continue;
        }
        let r = rho.values()[i];
        let nft = norm(f_tilde.at(i));
        reference_flux = reference_flux.max(norm(f.at(i)) * rt);
        flux = flux.max(nft * rt);
        let lr = if r > 0.0 { (rt / r).ln().abs() } else { f64::INFINITY };
        let term = if nft == 0.0 { 0.0 } else { nft * rt * lr };
        log_flux = log_flux.max(term);
    }
    let pass = reference_flux < BOUNDARY_TOLERANCE && flux < BOUNDARY_TOLERANCE && log_flux < BOUNDARY_TOLERANCE;
    Ok(BoundaryReport { reference_flux, flux, log_flux, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianDensity, Grid, HamiltonianSpec};

    #[test]
    fn gaussian_tails_pass() {
        let grid = Grid::uniform_1d(-8.0, 8.0, 1024).unwrap();
        let rt = GaussianDensity::scalar(0.5, 0.8).unwrap().on_grid(&grid).unwrap();
        let r = GaussianDensity::scalar(0.0, 1.0).unwrap().on_grid(&grid).unwrap();
        let ham = HamiltonianSpec::harmonic_1d(1.0, 1.0, 2.0).unwrap();
        let f = VectorFieldGrid::from_fn(grid.clone(), |x| ham.drift(x)).unwrap();
        let ft = VectorFieldGrid::from_fn(grid, |x| vec![-x[0] + 0.3]).unwrap();
        let rep = check_boundary_decay(&rt, &r, &ft, &f).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn uniform_with_constant_drift_fails() {
        let grid = Grid::uniform_1d(-1.0, 1.0, 32).unwrap();
        let u = GridDensity::uniform(grid.clone()).unwrap();
        let f = VectorFieldGrid::from_fn(grid, |_| vec![1.0]).unwrap();
        let rep = check_boundary_decay(&u, &u, &f, &f).unwrap();
        assert!(!rep.pass);
        assert!(rep.flux > 0.1);
    }

    #[test]
    fn zero_reference_field_gives_zero_first_term() {
        let grid = Grid::uniform_1d(-1.0, 1.0, 32).unwrap();
        let u = GridDensity::uniform(grid.clone()).unwrap();
        let zero = VectorFieldGrid::zeros(grid.clone());
        let f = VectorFieldGrid::from_fn(grid, |_| vec![1.0]).unwrap();
        let rep = check_boundary_decay(&u, &u, &f, &zero).unwrap();
        assert_eq!(rep.reference_flux, 0.0);
        assert_eq!(rep.log_flux, 0.0);
    }
}
