//! Equilibrium density, divergence, free energy, fluxes and forces.

use super::density::{GridDensity, VectorFieldGrid};
use super::gradient::{gradient, log_gradient};
use super::grid::Grid;
use super::hamiltonian::HamiltonianSpec;
use crate::error::{Error, Flagged, Result, Warning};

/// Equilibrium mass on the boundary layer must stay below this fraction of the peak.
pub const BOUNDARY_DECAY: f64 = 1e-10;
/// Divergence operands whose masses differ by more than this raise a warning.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Sampled `H` at every cell center.
pub fn energy_on_grid(ham: &HamiltonianSpec, grid: &Grid) -> Result<Vec<f64>> {
    let mut x = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|i| {
            grid.center_into(i, &mut x);
            let e = ham.energy(&x);
            if e.is_finite() {
                Ok(e)
            } else {
                Err(Error::HamiltonianNotFinite(x.clone()))
            }
        })
        .collect()
}

/// Maxwell-Boltzmann density `exp(−H/kT)/Z` with `Z` from grid quadrature.
///
/// Raises [`Warning::BoundaryMass`] when the box is too narrow for the
/// density to decay at its edges.
pub fn gibbs_density(ham: &HamiltonianSpec, grid: &Grid) -> Result<Flagged<GridDensity>> {
    if ham.dim() != grid.dim() {
        return Err(Error::InvalidArgument("hamiltonian and grid dimensions differ".into()));
    }
    let energy = energy_on_grid(ham, grid)?;
    let e_min = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let kt = ham.kt();
    let values: Vec<f64> = energy.iter().map(|e| (-(e - e_min) / kt).exp()).collect();
    let rho = GridDensity::normalized(grid.clone(), values)?;

    let interior_max = rho.max_value();
    let boundary_max = (0..grid.len())
        .filter(|&i| grid.is_boundary(i))
        .map(|i| rho.values()[i])
        .fold(0.0, f64::max);
    let mut out = Flagged::clean(rho);
    if boundary_max > BOUNDARY_DECAY * interior_max {
        out.warnings.push(Warning::BoundaryMass { boundary_max, interior_max });
    }
    Ok(out)
}

/// `D(ρ‖σ) = Σ ρ log(ρ/σ) · cell volume` in nats.
///
/// Cells with `ρ = 0` contribute nothing; `ρ > 0` where `σ = 0` yields `+∞`.
pub fn relative_entropy(rho: &GridDensity, sigma: &GridDensity) -> Result<Flagged<f64>> {
    if !rho.grid().same_as(sigma.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut acc = 0.0;
    for (&r, &s) in rho.values().iter().zip(sigma.values()) {
        if r == 0.0 {
            continue;
        }
        if s == 0.0 {
            acc = f64::INFINITY;
            break;
        }
        acc += r * (r / s).ln();
    }
    let mut out = Flagged::clean(acc * rho.grid().cell_volume());
    let (mr, ms) = (rho.total(), sigma.total());
    if (mr - ms).abs() > MASS_TOLERANCE {
        out.warnings.push(Warning::MassMismatch { lhs: mr, rhs: ms });
    }
    Ok(out)
}

/// Free energy `kT · D(ρ‖ρ̄)`.
pub fn free_energy(rho: &GridDensity, equilibrium: &GridDensity, kt: f64) -> Result<Flagged<f64>> {
    let d = relative_entropy(rho, equilibrium)?;
    Ok(Flagged { value: kt * d.value, warnings: d.warnings })
}

/// Discrete gradient of the sampled Hamiltonian.
pub fn energy_gradient(ham: &HamiltonianSpec, grid: &Grid) -> Result<VectorFieldGrid> {
    Ok(gradient(grid, &energy_on_grid(ham, grid)?))
}

/// Fluxes `J` and forces `Φ = −∇(H + kT log ρ)`.
///
/// The density gradient is taken as `ρ ∇log ρ` with the shared discrete
/// operator, so `J = (σ²/2kT) Φ ρ` holds cell-wise up to rounding.
pub fn flux_and_force(rho: &GridDensity, ham: &HamiltonianSpec) -> Result<(VectorFieldGrid, VectorFieldGrid)> {
    let grid = rho.grid();
    let (glog, valid) = log_gradient(rho)?;
    let gh = energy_gradient(ham, grid)?;
    let (kt, s2) = (ham.kt(), ham.sigma2());
    let n = grid.dim();
    let mut j = VectorFieldGrid::zeros(grid.clone());
    let mut phi = VectorFieldGrid::zeros(grid.clone());
    for cell in 0..grid.len() {
        if !valid[cell] {
            continue;
        }
        let r = rho.values()[cell];
        for d in 0..n {
            let dl = glog.component(cell, d);
            let dh = gh.component(cell, d);
            j.at_mut(cell)[d] = -0.5 * s2 * r * dl - s2 / (2.0 * kt) * dh * r;
            phi.at_mut(cell)[d] = -(dh + kt * dl);
        }
    }
    Ok((j, phi))
}
