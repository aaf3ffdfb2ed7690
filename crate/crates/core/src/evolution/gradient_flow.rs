//! The (U, χ) subsystem as a gradient flow `v̇ + ∂ψ(v) ∋ f` in `L² × L²`,
//! stated for the normalized constants only.

use crate::error::{Error, Result};
use crate::model::{ColumnDomain, MaterialParams};

fn require_normalized(p: &MaterialParams) -> Result<()> {
    if p.is_normalized() {
        Ok(())
    } else {
        Err(Error::NotNormalized(
            "c = kappa = lambda = nu = alpha = beta = gamma = rho0 = g = theta_c = 1, latent_heat = 2"
                .to_string(),
        ))
    }
}

/// `ψ(U, χ) = ∫ (½(U - 1 + χ)² + 2χ(1 - θ_Γ) - x3 U) + (1/|Ω|) ∫U ∫(1 - χ + x3)`,
/// `+∞` when `χ` leaves `[0, 1]`. The additive constant is taken as zero.
pub fn gradient_flow_potential(
    u: &[f64],
    chi: &[f64],
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> Result<f64> {
    require_normalized(p)?;
    if chi.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Ok(f64::INFINITY);
    }
    let local = dom.integrate_with(|i| {
        let s = u[i] - 1.0 + chi[i];
        0.5 * s * s + 2.0 * chi[i] * (1.0 - p.theta_gamma) - dom.z_centers[i] * u[i]
    });
    let coupling =
        dom.integrate(u) * dom.integrate_with(|i| 1.0 - chi[i] + dom.z_centers[i]) / dom.volume_total;
    Ok(local + coupling)
}

/// `f = (θ - θ_Γ - mean(θ - θ_Γ), 2(θ - θ_Γ))`.
pub fn gradient_flow_forcing(
    theta: &[f64],
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> (Vec<f64>, Vec<f64>) {
    let excess: Vec<f64> = theta.iter().map(|t| t - p.theta_gamma).collect();
    let mean = dom.mean(&excess);
    (
        excess.iter().map(|e| e - mean).collect(),
        excess.iter().map(|e| 2.0 * e).collect(),
    )
}

/// One implicit Euler step `(v_new - v_old)/dt + ∂ψ(v_new) ∋ f(θ)`.
///
/// Cellwise the step is a 2×2 linear system with a clamp on `χ`; the only
/// nonlocal unknown is the mean of `χ_new`, found from a scalar monotone
/// equation.
pub fn gradient_flow_step(
    u_old: &[f64],
    chi_old: &[f64],
    theta_input: &[f64],
    dt: f64,
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> Result<(Vec<f64>, Vec<f64>)> {
    require_normalized(p)?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    dom.check_len("u", u_old)?;
    dom.check_len("chi", chi_old)?;
    dom.check_len("theta", theta_input)?;
    let n = dom.n_cells;
    let (f_u, _) = gradient_flow_forcing(theta_input, p, dom);
    let a = 1.0 / dt + 1.0;
    let mean_u = (dom.mean(u_old) / dt + dom.mean(&f_u)) / a;

    // χ-independent parts of the right-hand sides
    let base_u: Vec<f64> = (0..n)
        .map(|i| u_old[i] / dt + f_u[i] + (dom.z_centers[i] - dom.m))
        .collect();
    let base_chi: Vec<f64> = (0..n)
        .map(|i| chi_old[i] / dt + 2.0 * theta_input[i] - 1.0 + mean_u)
        .collect();
    let chi_for = |mean_chi: f64, out: &mut Vec<f64>| {
        out.clear();
        out.extend((0..n).map(|i| {
            let r_u = base_u[i] + mean_chi;
            ((base_chi[i] - r_u / a) / (a - 1.0 / a)).clamp(0.0, 1.0)
        }));
    };

    let mut chi = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut m = dom.mean(chi_old);
    for _ in 0..200 {
        chi_for(m, &mut chi);
        let h = m - dom.mean(&chi);
        if h.abs() <= 1e-15 {
            break;
        }
        if h < 0.0 {
            lo = lo.max(m);
        } else {
            hi = hi.min(m);
        }
        if hi - lo <= 1e-16 {
            break;
        }
        let free = dom.integrate_with(|i| if chi[i] > 0.0 && chi[i] < 1.0 { 1.0 } else { 0.0 })
            / dom.volume_total;
        let slope = 1.0 + free / (a * a - 1.0);
        let next = m - h / slope;
        m = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    chi_for(m, &mut chi);
    let u: Vec<f64> = (0..n).map(|i| (base_u[i] + m - chi[i]) / a).collect();
    Ok((u, chi))
}
