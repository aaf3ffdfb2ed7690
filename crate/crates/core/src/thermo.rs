//! Pointwise state functions: pressure, free energy, internal energy and
//! entropy, plus the extended energy used as a Lyapunov functional.
//!
//! Every density is volumetric (already multiplied by `rho0`). The indicator
//! of `[0, 1]` in the free energy is not evaluated; callers must keep the
//! liquid fraction inside the interval, and the functions that take a whole
//! state reject anything else.

use crate::error::{Error, Result};
use crate::model::{ColumnDomain, MaterialParams, StateField};

/// Cell fields of the state functions at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoFields {
    pub pressure: Vec<f64>,
    pub energy_density: Vec<f64>,
    pub entropy_density: Vec<f64>,
    pub free_energy_density: Vec<f64>,
    pub p_of_t: f64,
}

impl ThermoFields {
    pub fn evaluate(
        state: &StateField,
        u_t: &[f64],
        p: &MaterialParams,
        dom: &ColumnDomain,
    ) -> Result<Self> {
        let (energy_density, entropy_density) = energy_entropy_densities(state, p)?;
        Ok(ThermoFields {
            pressure: pressure_field(state, u_t, p),
            energy_density,
            entropy_density,
            free_energy_density: free_energy_density(state, p)?,
            p_of_t: mean_pressure_offset(state, p, dom),
        })
    }
}

/// `U - alpha (1 - chi)`, the elastic strain left after the phase strain.
#[inline]
pub fn elastic_strain(p: &MaterialParams, u: f64, chi: f64) -> f64 {
    u - p.alpha * (1.0 - chi)
}

/// The spatial constant `P(t)` of the hydrostatic pressure `p = P(t) - rho0 g x3`,
/// fixed by the zero-mean condition on `U`.
pub fn mean_pressure_offset(state: &StateField, p: &MaterialParams, dom: &ColumnDomain) -> f64 {
    let phase = dom.integrate_with(|i| 1.0 - state.chi[i]);
    let thermal = dom.integrate_with(|i| state.theta[i] - p.theta_c);
    let height = dom.integrate(&dom.z_centers);
    (p.alpha * p.lambda * phase + p.beta * thermal + p.rho0 * p.g * height) / dom.volume_total
}

#[inline]
pub fn pressure_at(p: &MaterialParams, theta: f64, u: f64, chi: f64, u_t: f64) -> f64 {
    -p.nu * u_t - p.lambda * elastic_strain(p, u, chi) + p.beta * (theta - p.theta_c)
}

/// Relative pressure per cell; `u_t` is the rate of `U` (zero for a state at rest).
pub fn pressure_field(state: &StateField, u_t: &[f64], p: &MaterialParams) -> Vec<f64> {
    (0..state.n_cells())
        .map(|i| pressure_at(p, state.theta[i], state.u[i], state.chi[i], u_t[i]))
        .collect()
}

#[inline]
pub fn energy_density_at(p: &MaterialParams, theta: f64, u: f64, chi: f64) -> f64 {
    let q = elastic_strain(p, u, chi);
    p.c * theta + 0.5 * p.lambda * q * q + p.beta * p.theta_c * u + p.latent_heat * chi
}

#[inline]
pub fn entropy_density_at(p: &MaterialParams, theta: f64, u: f64, chi: f64) -> f64 {
    p.c * (theta / p.theta_c).ln() + p.latent_heat / p.theta_c * chi + p.beta * u
}

#[inline]
pub fn free_energy_density_at(p: &MaterialParams, theta: f64, u: f64, chi: f64) -> f64 {
    let q = elastic_strain(p, u, chi);
    p.c * theta * (1.0 - (theta / p.theta_c).ln()) + 0.5 * p.lambda * q * q
        - p.beta * (theta - p.theta_c) * u
        + p.latent_heat * chi * (1.0 - theta / p.theta_c)
}

fn check_phase(state: &StateField) -> Result<()> {
    match state
        .chi
        .iter()
        .enumerate()
        .find(|(_, c)| !(0.0..=1.0).contains(*c))
    {
        Some((cell, &value)) => Err(Error::PhaseOutOfRange { cell, value }),
        None => Ok(()),
    }
}

/// Volumetric internal energy and entropy per cell.
pub fn energy_entropy_densities(
    state: &StateField,
    p: &MaterialParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_phase(state)?;
    let n = state.n_cells();
    let mut e = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let (theta, u, chi) = (state.theta[i], state.u[i], state.chi[i]);
        e.push(energy_density_at(p, theta, u, chi));
        s.push(entropy_density_at(p, theta, u, chi));
    }
    Ok((e, s))
}

/// Volumetric Helmholtz free energy per cell.
pub fn free_energy_density(state: &StateField, p: &MaterialParams) -> Result<Vec<f64>> {
    check_phase(state)?;
    Ok((0..state.n_cells())
        .map(|i| free_energy_density_at(p, state.theta[i], state.u[i], state.chi[i]))
        .collect())
}

/// `∫ (c θ + λ/2 (U - α(1-χ))² + Lχ - ρ0 g x3 U) - θ_Γ ∫ (c log(θ/θ_c) + L χ / θ_c)`.
///
/// Nonincreasing along solutions when `theta_gamma` is constant.
pub fn extended_energy(state: &StateField, p: &MaterialParams, dom: &ColumnDomain) -> f64 {
    dom.integrate_with(|i| {
        let (theta, u, chi) = (state.theta[i], state.u[i], state.chi[i]);
        let q = elastic_strain(p, u, chi);
        p.c * theta + 0.5 * p.lambda * q * q + p.latent_heat * chi
            - p.rho0 * p.g * dom.z_centers[i] * u
            - p.theta_gamma * (p.c * (theta / p.theta_c).ln() + p.latent_heat / p.theta_c * chi)
    })
}

/// `∫ (ρ0 e - ρ0 g x3 U)`, the energy whose rate equals the boundary heat supply.
pub fn total_energy_with_gravity(
    state: &StateField,
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> f64 {
    dom.integrate_with(|i| {
        energy_density_at(p, state.theta[i], state.u[i], state.chi[i])
            - p.rho0 * p.g * dom.z_centers[i] * state.u[i]
    })
}

pub fn total_entropy(state: &StateField, p: &MaterialParams, dom: &ColumnDomain) -> f64 {
    dom.integrate_with(|i| entropy_density_at(p, state.theta[i], state.u[i], state.chi[i]))
}
