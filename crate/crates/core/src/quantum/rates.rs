use nalgebra::Complex;

use super::dynamics::LindbladSpec;
use super::operators::{commutator, trace_product, DensityOperator, HamiltonianOperator, Spectrum};
use crate::error::{Error, Result};

/// Imaginary parts of reported rates above this are an error.
pub const IMAGINARY_TOL: f64 = 1e-10;
/// Allowed norm of `[ρ̄, H]` for a stationary reference.
pub const COMMUTATION_TOL: f64 = 1e-10;
const SUPPORT_TOL: f64 = 1e-14;

fn real_part(z: Complex<f64>) -> Result<f64> {
    if z.im.abs() > IMAGINARY_TOL * z.re.abs().max(1.0) {
        return Err(Error::ComplexRate(z.im));
    }
    Ok(z.re)
}

fn same_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("operator dimensions differ ({a} vs {b})")));
    }
    Ok(())
}

/// `tr ρ(log ρ − log σ)` in nats; `+∞` when the support of `ρ` is not
/// contained in that of `σ`.
pub fn quantum_relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    if rho.dim() != sigma.dim() {
        return f64::NAN;
    }
    let a = Spectrum::of(rho.matrix());
    let b = Spectrum::of(sigma.matrix());
    let overlap = a.vectors.adjoint() * &b.vectors;
    let mut d = 0.0;
    for i in 0..rho.dim() {
        let p = a.values[i];
        if p <= 0.0 {
            continue;
        }
        d += p * p.ln();
        for j in 0..rho.dim() {
            let w = p * overlap[(i, j)].norm_sqr();
            let q = b.values[j];
            if q <= SUPPORT_TOL {
                if w > SUPPORT_TOL {
                    return f64::INFINITY;
                }
                continue;
            }
            d -= w * q.ln();
        }
    }
    d.max(0.0)
}

/// `(i/ħ) tr(ρ [ΔH, log ρ̃])`: rate of `D(ρ‖ρ̃)` when `ρ` follows `H` and `ρ̃` follows `H + ΔH`.
pub fn qrec_rate(rho: &DensityOperator, delta_h: &HamiltonianOperator, rho_tilde: &DensityOperator) -> Result<f64> {
    same_dims(rho.dim(), delta_h.dim())?;
    same_dims(rho.dim(), rho_tilde.dim())?;
    let log_t = rho_tilde.log()?;
    let z = trace_product(rho.matrix(), &commutator(delta_h.matrix(), &log_t)) * Complex::new(0.0, 1.0 / delta_h.hbar());
    real_part(z)
}

fn check_stationary(spec: &LindbladSpec, rho_bar: &DensityOperator) -> Result<()> {
    same_dims(spec.dim(), rho_bar.dim())?;
    let norm = commutator(rho_bar.matrix(), spec.hamiltonian().matrix()).norm();
    if norm > COMMUTATION_TOL {
        return Err(Error::NonCommutingStationary(norm));
    }
    Ok(())
}

/// `tr(L[ρ](log ρ − log ρ̄))` for the generator of `spec`.
pub fn dissipative_production_rate(rho: &DensityOperator, spec: &LindbladSpec, rho_bar: &DensityOperator) -> Result<f64> {
    check_stationary(spec, rho_bar)?;
    same_dims(spec.dim(), rho.dim())?;
    let diff = rho.log()? - rho_bar.log()?;
    real_part(trace_product(&spec.generator(rho.matrix()), &diff))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrecdRates {
    pub total: f64,
    pub hamiltonian_term: f64,
    pub dissipative_term: f64,
}

/// Rate of `D(ρ‖ρ̄)` along the Lindblad flow with `H + ΔH`, for a fixed
/// target `ρ̄` commuting with `H`: `−(i/ħ)⟨[ΔH, log ρ̄]⟩_ρ + tr(L[ρ](log ρ − log ρ̄))`.
pub fn qrecd_rate(
    rho: &DensityOperator,
    delta_h: &HamiltonianOperator,
    spec: &LindbladSpec,
    rho_bar: &DensityOperator,
) -> Result<QrecdRates> {
    same_dims(spec.dim(), delta_h.dim())?;
    if delta_h.hbar() != spec.hamiltonian().hbar() {
        return Err(Error::InvalidArgument("perturbation and generator use different hbar".into()));
    }
    let dissipative_term = dissipative_production_rate(rho, spec, rho_bar)?;
    let log_bar = rho_bar.log()?;
    let z = trace_product(rho.matrix(), &commutator(delta_h.matrix(), &log_bar))
        * Complex::new(0.0, -1.0 / delta_h.hbar());
    let hamiltonian_term = real_part(z)?;
    Ok(QrecdRates { total: hamiltonian_term + dissipative_term, hamiltonian_term, dissipative_term })
}
