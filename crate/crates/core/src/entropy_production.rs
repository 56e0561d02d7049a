//! Rates of change of relative entropy along continuity-form evolutions.
//!
//! Every rate here is `d/dt D`; entropy production in the thermodynamic
//! sense is its negative. All integrands share the discrete gradient of
//! [`crate::model::gradient`], so the algebraic identities between the
//! different rate formulas hold to rounding.

use crate::error::{Error, Flagged, Result, Warning};
use crate::fokker_planck::{check_boundary_decay, BoundaryReport};
use crate::model::{
    energy_on_grid, flux_and_force, log_gradient, log_ratio_gradient, masked_gradient, GridDensity, HamiltonianSpec,
    VectorFieldGrid, DENSITY_FLOOR,
};

/// Relative tolerance of the check between the two free-energy decay forms.
pub const FE_IDENTITY_RTOL: f64 = 1e-6;
/// Below this magnitude both forms are rounding noise and are not compared.
const FE_IDENTITY_FLOOR: f64 = 1e-14;

fn same_grid(rho: &GridDensity, fields: &[&VectorFieldGrid]) -> Result<()> {
    if fields.iter().all(|f| f.grid().same_as(rho.grid())) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn flag(value: f64, report: &BoundaryReport) -> Flagged<f64> {
    let mut out = Flagged::clean(value);
    if !report.pass {
        out.warnings.push(Warning::BoundarySuspect { max_term: report.max_term() });
    }
    out
}

/// Continuity velocity `drift − (σ²/2)∇log ρ`, the `f` of `∂ρ/∂t + ∇·(fρ) = 0`
/// for a Fokker-Planck equation with transport `drift` and diffusion `σ²`.
pub fn continuity_velocity(rho: &GridDensity, drift: &VectorFieldGrid, sigma2: f64) -> Result<VectorFieldGrid> {
    same_grid(rho, &[drift])?;
    let (glog, _) = log_gradient(rho)?;
    drift.combine(1.0, &glog, -0.5 * sigma2)
}

/// `d/dt D(ρ̃‖ρ) = ∫ ∇log(ρ̃/ρ)·(f̃ − f) ρ̃ dx` for continuity velocities `f̃`, `f`.
///
/// Flagged [`Warning::BoundarySuspect`] when the boundary terms dropped in
/// the integration by parts are not negligible on this box.
pub fn relative_entropy_rate(
    rho_tilde: &GridDensity,
    rho: &GridDensity,
    f_tilde: &VectorFieldGrid,
    f: &VectorFieldGrid,
) -> Result<Flagged<f64>> {
    same_grid(rho_tilde, &[f_tilde, f])?;
    log_gradient(rho_tilde)?;
    log_gradient(rho)?;
    let (g, valid) = log_ratio_gradient(rho_tilde, rho)?;
    let grid = rho_tilde.grid();
    let mut diff = vec![0.0; grid.dim()];
    let mut acc = 0.0;
    for cell in (0..grid.len()).filter(|&c| valid[c]) {
        for (d, v) in diff.iter_mut().enumerate() {
            *v = f_tilde.component(cell, d) - f.component(cell, d);
        }
        acc += dot(g.at(cell), &diff) * rho_tilde.values()[cell];
    }
    let report = check_boundary_decay(rho_tilde, rho, f_tilde, f)?;
    Ok(flag(acc * grid.cell_volume(), &report))
}

/// `d/dt S(ρ) = −∫ ∇log ρ · f ρ dx` for the continuity velocity `f`.
pub fn entropy_rate(rho: &GridDensity, f: &VectorFieldGrid) -> Result<Flagged<f64>> {
    same_grid(rho, &[f])?;
    let (g, valid) = log_gradient(rho)?;
    let grid = rho.grid();
    let acc: f64 = (0..grid.len())
        .filter(|&c| valid[c])
        .map(|c| dot(g.at(c), f.at(c)) * rho.values()[c])
        .sum();
    // Lebesgue reference: ρ ≡ 1 and zero velocity
    let ones = GridDensity::new(grid.clone(), vec![1.0; grid.len()])?;
    let report = check_boundary_decay(rho, &ones, f, &VectorFieldGrid::zeros(grid.clone()))?;
    Ok(flag(-acc * grid.cell_volume(), &report))
}

/// `∫ |∇log(ρ/ρ̄)|² ρ dx`.
pub fn relative_fisher_information(rho: &GridDensity, equilibrium: &GridDensity) -> Result<f64> {
    log_gradient(rho)?;
    let (g, valid) = log_ratio_gradient(rho, equilibrium)?;
    let grid = rho.grid();
    let acc: f64 = (0..grid.len())
        .filter(|&c| valid[c])
        .map(|c| dot(g.at(c), g.at(c)) * rho.values()[c])
        .sum();
    Ok(acc * grid.cell_volume())
}

/// Split of `d/dt D(ρᵘ‖ρ̄)` into dissipation and control contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionReport {
    /// `d/dt D(ρᵘ‖ρ̄) = −pepr + epur`
    pub total: f64,
    /// `(σ²/2) ∫ |∇log(ρᵘ/ρ̄)|² ρᵘ`, never negative
    pub pepr: f64,
    /// `∫ ∇log(ρᵘ/ρ̄) · u ρᵘ`
    pub epur: f64,
    pub certificate: BoundaryReport,
}

impl ProductionReport {
    /// Entropy production `−d/dt D`.
    pub fn entropy_production(&self) -> f64 {
        -self.total
    }
}

/// Rate of `D(ρᵘ‖ρ̄)` under control `u`, where `ρ̄` is the Gibbs density of
/// the uncontrolled dynamics with noise intensity `σ²`.
pub fn production_decomposition(
    rho_u: &GridDensity,
    equilibrium: &GridDensity,
    u: &VectorFieldGrid,
    sigma2: f64,
) -> Result<ProductionReport> {
    same_grid(rho_u, &[u])?;
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma^2 must be nonnegative, got {sigma2}")));
    }
    log_gradient(rho_u)?;
    log_gradient(equilibrium)?;
    let (g, valid) = log_ratio_gradient(rho_u, equilibrium)?;
    let grid = rho_u.grid();
    let (mut fisher, mut pump) = (0.0, 0.0);
    for cell in (0..grid.len()).filter(|&c| valid[c]) {
        let r = rho_u.values()[cell];
        fisher += dot(g.at(cell), g.at(cell)) * r;
        pump += dot(g.at(cell), u.at(cell)) * r;
    }
    let pepr = 0.5 * sigma2 * fisher * grid.cell_volume();
    let epur = pump * grid.cell_volume();
    // relative to ρ̄ the continuity velocity of the controlled flow is u − (σ²/2)∇log(ρᵘ/ρ̄)
    let f_tilde = u.combine(1.0, &g, -0.5 * sigma2)?;
    let certificate = check_boundary_decay(rho_u, equilibrium, &f_tilde, &VectorFieldGrid::zeros(grid.clone()))?;
    Ok(ProductionReport { total: -pepr + epur, pepr, epur, certificate })
}

/// Free energy decay `d/dt F = −(σ² kT/2) ∫ |∇log(ρ/ρ̄)|² ρ dx`.
///
/// The flux-force form `−∫ J·Φ dx` is evaluated alongside and the call fails
/// if the two disagree beyond [`FE_IDENTITY_RTOL`].
pub fn free_energy_decay_rate(rho: &GridDensity, ham: &HamiltonianSpec) -> Result<f64> {
    let grid = rho.grid();
    if ham.dim() != grid.dim() {
        return Err(Error::InvalidArgument("hamiltonian and grid dimensions differ".into()));
    }
    let (kt, s2) = (ham.kt(), ham.sigma2());
    let energy = energy_on_grid(ham, grid)?;
    // log ρ̄ = −H/kT up to a constant; taken directly so deep wells cannot underflow
    let valid: Vec<bool> = rho.values().iter().map(|&v| v > DENSITY_FLOOR).collect();
    let logs: Vec<f64> = (0..grid.len())
        .map(|i| if valid[i] { rho.values()[i].ln() + energy[i] / kt } else { 0.0 })
        .collect();
    log_gradient(rho)?;
    let g = masked_gradient(grid, &logs, Some(&valid));
    let fisher: f64 = (0..grid.len())
        .filter(|&c| valid[c])
        .map(|c| dot(g.at(c), g.at(c)) * rho.values()[c])
        .sum::<f64>()
        * grid.cell_volume();
    let fisher_form = -0.5 * s2 * kt * fisher;

    let (j, phi) = flux_and_force(rho, ham)?;
    let flux_form = -(0..grid.len()).map(|c| dot(j.at(c), phi.at(c))).sum::<f64>() * grid.cell_volume();
    let scale = fisher_form.abs().max(flux_form.abs());
    if (fisher_form - flux_form).abs() > FE_IDENTITY_RTOL * scale + FE_IDENTITY_FLOOR {
        return Err(Error::FreeEnergyIdentity { fisher_form, flux_form });
    }
    Ok(fisher_form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gibbs_density, GaussianDensity, Grid};

    fn ou() -> (Grid, HamiltonianSpec) {
        (Grid::uniform_1d(-8.0, 8.0, 2048).unwrap(), HamiltonianSpec::harmonic_1d(1.0, 1.0, 2.0).unwrap())
    }

    fn drift_field(grid: &Grid, ham: &HamiltonianSpec) -> VectorFieldGrid {
        VectorFieldGrid::from_fn(grid.clone(), |x| ham.drift(x)).unwrap()
    }

    // E[(X(1 − 1/v) + m/v)²] for X ~ N(m, v): the Gaussian relative Fisher information against N(0,1)
    fn fisher_oracle(m: f64, v: f64) -> f64 {
        (v - 1.0).powi(2) / v + m * m
    }

    #[test]
    fn identical_flows_have_zero_rate() {
        let (grid, ham) = ou();
        let rho = GaussianDensity::scalar(0.3, 1.2).unwrap().on_grid(&grid).unwrap();
        let f = continuity_velocity(&rho, &drift_field(&grid, &ham), 2.0).unwrap();
        let r = relative_entropy_rate(&rho, &rho, &f, &f).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.is_clean());
    }

    #[test]
    fn gaussian_pair_rate() {
        let (grid, ham) = ou();
        let b = drift_field(&grid, &ham);
        let rt = GaussianDensity::scalar(1.0, 2.0).unwrap().on_grid(&grid).unwrap();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        let ft = continuity_velocity(&rt, &b, 2.0).unwrap();
        let f = continuity_velocity(&eq, &b, 2.0).unwrap();
        let r = relative_entropy_rate(&rt, &eq, &ft, &f).unwrap();
        let exact = -fisher_oracle(1.0, 2.0);
        assert!((exact + 1.5).abs() < 1e-12);
        assert!((r.value - exact).abs() < 0.01 * exact.abs(), "{}", r.value);
    }

    #[test]
    fn heat_flow_entropy_rate() {
        let (grid, _) = ou();
        let rho = GaussianDensity::scalar(0.0, 1.0).unwrap().on_grid(&grid).unwrap();
        let f = continuity_velocity(&rho, &VectorFieldGrid::zeros(grid.clone()), 2.0).unwrap();
        let s = entropy_rate(&rho, &f).unwrap();
        assert!((s.value - 1.0).abs() < 0.01);
        assert_eq!(entropy_rate(&rho, &VectorFieldGrid::zeros(grid)).unwrap().value, 0.0);
    }

    #[test]
    fn equilibrium_continuity_velocity_vanishes() {
        let (grid, ham) = ou();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        let f = continuity_velocity(&eq, &drift_field(&grid, &ham), 2.0).unwrap();
        // exact in the interior; one-sided differences at the two walls
        assert!((1..grid.len() - 1).all(|c| f.component(c, 0).abs() < 1e-9));
        assert!(entropy_rate(&eq, &f).unwrap().value.abs() < 1e-6);
    }

    #[test]
    fn decomposition_without_control() {
        let (grid, ham) = ou();
        let rho = GaussianDensity::scalar(1.0, 2.0).unwrap().on_grid(&grid).unwrap();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        let rep = production_decomposition(&rho, &eq, &VectorFieldGrid::zeros(grid.clone()), 2.0).unwrap();
        assert_eq!(rep.epur, 0.0);
        assert_eq!(rep.total, -rep.pepr);
        assert!((rep.total + 1.5).abs() < 0.015);
        assert_eq!(rep.entropy_production(), rep.pepr);
    }

    #[test]
    fn decomposition_under_feedback() {
        let (grid, ham) = ou();
        let rho = GaussianDensity::scalar(1.0, 2.0).unwrap().on_grid(&grid).unwrap();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        let (g, _) = log_ratio_gradient(&rho, &eq).unwrap();
        let u = g.scaled(-1.0);
        let rep = production_decomposition(&rho, &eq, &u, 2.0).unwrap();
        assert!((rep.pepr - 1.5).abs() < 0.015);
        assert!((rep.epur + 1.5).abs() < 0.015);
        assert!((rep.total + 3.0).abs() < 0.03);
        assert!((rep.total - (-rep.pepr + rep.epur)).abs() <= 1e-12);
    }

    #[test]
    fn rotational_control_pumps_nothing() {
        let grid = Grid::cube(2, -7.0, 7.0, 160).unwrap();
        let q = nalgebra::DMatrix::identity(2, 2);
        let ham = HamiltonianSpec::quadratic(q, 1.0, 2.0).unwrap();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        // radially symmetric ρᵘ: ∇log(ρᵘ/ρ̄) is radial, u is tangential
        let rho = GaussianDensity::isotropic(&[0.0, 0.0], 1.7).unwrap().on_grid(&grid).unwrap();
        let u = VectorFieldGrid::from_fn(grid.clone(), |x| vec![-x[1], x[0]]).unwrap();
        let rep = production_decomposition(&rho, &eq, &u, 2.0).unwrap();
        assert!(rep.epur.abs() < 1e-6, "{}", rep.epur);
        assert!(rep.pepr > 0.0);
    }

    #[test]
    fn general_formula_specializes_to_decomposition() {
        let (grid, ham) = ou();
        let rho = GaussianDensity::scalar(0.7, 1.4).unwrap().on_grid(&grid).unwrap();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        let u = VectorFieldGrid::from_fn(grid.clone(), |x| vec![0.4 * (0.5 * x[0]).sin()]).unwrap();
        let rep = production_decomposition(&rho, &eq, &u, 2.0).unwrap();
        let (g, _) = log_ratio_gradient(&rho, &eq).unwrap();
        let diff = u.combine(1.0, &g, -1.0).unwrap();
        let zero = VectorFieldGrid::zeros(grid.clone());
        let r = relative_entropy_rate(&rho, &eq, &diff, &zero).unwrap();
        assert!((r.value - rep.total).abs() <= 1e-12 * rep.total.abs().max(1.0));
    }

    #[test]
    fn free_energy_forms_and_consistency() {
        let (grid, ham) = ou();
        let eq = gibbs_density(&ham, &grid).unwrap().value;
        assert!(free_energy_decay_rate(&eq, &ham).unwrap().abs() < 1e-10);
        let rho = GaussianDensity::scalar(1.0, 2.0).unwrap().on_grid(&grid).unwrap();
        let fe = free_energy_decay_rate(&rho, &ham).unwrap();
        assert!((fe + 1.5).abs() < 0.015);
        let rep = production_decomposition(&rho, &eq, &VectorFieldGrid::zeros(grid), 2.0).unwrap();
        assert!((fe - ham.kt() * rep.total).abs() <= 1e-12 * fe.abs());
    }

    #[test]
    fn free_energy_scales_with_temperature() {
        let grid = Grid::uniform_1d(-10.0, 10.0, 2048).unwrap();
        let ham = HamiltonianSpec::harmonic_1d(1.0, 2.0, 1.0).unwrap();
        let rho = GaussianDensity::scalar(0.5, 1.0).unwrap().on_grid(&grid).unwrap();
        // ρ̄ = N(0, 2): ∇log(ρ/ρ̄) = 0.5 − x/2, with mean 0.25 and variance 0.25 under ρ
        let fisher = 0.0625 + 0.25;
        let exact = -0.5 * 1.0 * 2.0 * fisher;
        assert!((free_energy_decay_rate(&rho, &ham).unwrap() - exact).abs() < 1e-3);
    }

    #[test]
    fn boundary_suspect_is_flagged() {
        let grid = Grid::uniform_1d(-1.0, 1.0, 64).unwrap();
        let rho = GridDensity::uniform(grid.clone()).unwrap();
        let sigma = GaussianDensity::scalar(0.0, 1.0).unwrap().on_grid(&grid).unwrap();
        let f = VectorFieldGrid::from_fn(grid.clone(), |_| vec![1.0]).unwrap();
        let r = relative_entropy_rate(&rho, &sigma, &f, &VectorFieldGrid::zeros(grid)).unwrap();
        assert!(matches!(r.warnings[0], Warning::BoundarySuspect { .. }));
    }

    #[test]
    fn interior_zero_is_rejected() {
        let grid = Grid::uniform_1d(0.0, 1.0, 8).unwrap();
        let mut v = vec![1.0; 8];
        v[3] = 0.0;
        let rho = GridDensity::new(grid.clone(), v).unwrap();
        let ok = GridDensity::uniform(grid.clone()).unwrap();
        let z = VectorFieldGrid::zeros(grid);
        assert_eq!(relative_entropy_rate(&rho, &ok, &z, &z).unwrap_err(), Error::LogDensityUndefined(3));
        assert!(entropy_rate(&rho, &z).is_err());
    }
}
