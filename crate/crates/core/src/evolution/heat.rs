use crate::error::{Error, Result};
use crate::model::{ColumnDomain, MaterialParams};
use crate::tridiag;

/// Rates and new-level fields that drive one heat step.
#[derive(Debug, Clone, Copy)]
pub struct HeatSources<'a> {
    pub u_new: &'a [f64],
    pub chi_new: &'a [f64],
    pub u_t: &'a [f64],
    pub chi_t: &'a [f64],
    /// Temperature multiplying the thermal-stress term `β θ U_t`. `None`
    /// treats it implicitly with the unknown temperature; Picard mode passes
    /// the frozen (truncated) input temperature instead.
    pub thermal_stress_theta: Option<&'a [f64]>,
}

/// Per-cell heat exchange coefficients with the exterior: Robin ends on the
/// bottom and top cells plus lateral exchange through the side wall.
/// Units W/K; the supply into cell `i` is `coef[i] (θ_Γ - θ_i)`.
pub fn exchange_coefficients(p: &MaterialParams, dom: &ColumnDomain) -> Vec<f64> {
    let n = dom.n_cells;
    let mut coef: Vec<f64> = (0..n)
        .map(|i| p.h_lateral * dom.perimeter[i] * dom.dz)
        .collect();
    coef[0] += p.h_bottom * dom.area[0];
    coef[n - 1] += p.h_top * dom.area[n - 1];
    coef
}

/// Total heat supply `∫_∂Ω h (θ_Γ - θ)` as applied by the heat step.
pub fn boundary_heat_supply(theta: &[f64], p: &MaterialParams, dom: &ColumnDomain) -> f64 {
    exchange_coefficients(p, dom)
        .iter()
        .zip(theta)
        .map(|(k, th)| k * (p.theta_gamma - th))
        .sum()
}

/// Implicit finite-volume heat step:
///
/// `c (θ_new - θ_old)/dt - κ (1/A)(A θ_z)_z = ν U_t² - β θ U_t - (αλ(U - α(1-χ)) + L) χ_t`
///
/// with `U`, `χ` at the new level, Robin exchange on the ends and optional
/// lateral exchange. Rejects the step if any temperature is not positive.
pub fn update_theta(
    theta_old: &[f64],
    src: &HeatSources<'_>,
    dt: f64,
    t_new: f64,
    p: &MaterialParams,
    dom: &ColumnDomain,
    linear_tol: f64,
) -> Result<Vec<f64>> {
    let n = dom.n_cells;
    let exchange = exchange_coefficients(p, dom);
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let vol = dom.cell_volume(i);
        let q = src.u_new[i] - p.alpha * (1.0 - src.chi_new[i]);
        let mut source =
            p.nu * src.u_t[i] * src.u_t[i] - (p.alpha * p.lambda * q + p.latent_heat) * src.chi_t[i];
        diag[i] = p.c * vol / dt + exchange[i];
        match src.thermal_stress_theta {
            None => diag[i] += p.beta * src.u_t[i] * vol,
            Some(th) => source -= p.beta * th[i] * src.u_t[i],
        }
        rhs[i] = p.c * vol * theta_old[i] / dt + vol * source + exchange[i] * p.theta_gamma;
        if i > 0 {
            let k = p.kappa * dom.face_area(i - 1) / dom.dz;
            diag[i] += k;
            lower[i] = -k;
        }
        if i + 1 < n {
            let k = p.kappa * dom.face_area(i) / dom.dz;
            diag[i] += k;
            upper[i] = -k;
        }
    }
    let theta = tridiag::solve(&lower, &diag, &upper, &rhs);
    let residual = tridiag::relative_residual(&lower, &diag, &upper, &rhs, &theta);
    if !(residual <= linear_tol) {
        return Err(Error::LinearSolve {
            residual,
            tol: linear_tol,
        });
    }
    if let Some((cell, &value)) = theta
        .iter()
        .enumerate()
        .find(|(_, t)| !(t.is_finite() && **t > 0.0))
    {
        return Err(Error::PositivityLoss {
            t: t_new,
            cell,
            value,
        });
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quiet<'a>(u: &'a [f64], chi: &'a [f64], zeros: &'a [f64]) -> HeatSources<'a> {
        HeatSources {
            u_new: u,
            chi_new: chi,
            u_t: zeros,
            chi_t: zeros,
            thermal_stress_theta: None,
        }
    }

    #[test]
    fn boundary_temperature_is_preserved() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 20).unwrap();
        let z = vec![0.0; 20];
        let chi = vec![1.0; 20];
        let th = update_theta(&vec![1.0; 20], &quiet(&z, &chi, &z), 0.1, 0.1, &p, &dom, 1e-12).unwrap();
        assert!(th.iter().all(|&t| (t - 1.0).abs() < 1e-14));
    }

    #[test]
    fn insulated_diffusion_conserves_heat() {
        let mut p = MaterialParams::normalized();
        p.h_bottom = 0.0;
        p.h_top = 0.0;
        let dom = ColumnDomain::build(0.0, 1.0, 30, |z| 1.0 + z, |_| 0.0).unwrap();
        let z = vec![0.0; 30];
        let chi = vec![1.0; 30];
        let old: Vec<f64> = (0..30).map(|i| 1.0 + (i as f64 * 0.7).sin().abs()).collect();
        let new = update_theta(&old, &quiet(&z, &chi, &z), 0.05, 0.05, &p, &dom, 1e-12).unwrap();
        let before = dom.integrate(&old);
        let after = dom.integrate(&new);
        assert!(((after - before) / before).abs() < 1e-12);
    }

    #[test]
    fn lateral_exchange_pulls_toward_boundary_temperature() {
        let mut p = MaterialParams::normalized();
        p.h_bottom = 0.0;
        p.h_top = 0.0;
        p.h_lateral = 3.0;
        let dom = ColumnDomain::build(0.0, 1.0, 10, |_| 1.0, |_| 4.0).unwrap();
        let z = vec![0.0; 10];
        let chi = vec![1.0; 10];
        let new = update_theta(&vec![2.0; 10], &quiet(&z, &chi, &z), 0.1, 0.1, &p, &dom, 1e-12).unwrap();
        // uniform decay: c (θ - 2)/dt = -h P/A (θ - 1)
        let expected = (2.0 / 0.1 + 12.0) / (1.0 / 0.1 + 12.0);
        assert!(new.iter().all(|&t| (t - expected).abs() < 1e-13));
    }

    #[test]
    fn positivity_loss_is_reported() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 4).unwrap();
        let u = vec![0.0; 4];
        let chi = vec![1.0; 4];
        let zeros = vec![0.0; 4];
        let chi_t = vec![5.0; 4];
        let src = HeatSources {
            u_new: &u,
            chi_new: &chi,
            u_t: &zeros,
            chi_t: &chi_t,
            thermal_stress_theta: None,
        };
        let err = update_theta(&vec![0.1; 4], &src, 1.0, 1.0, &p, &dom, 1e-12).unwrap_err();
        assert!(matches!(err, Error::PositivityLoss { .. }));
    }

    proptest! {
        #[test]
        fn source_free_step_does_not_expand_extremes(
            old in proptest::collection::vec(0.2f64..3.0, 2..40),
            dt in 1e-4f64..10.0,
            h in 0.0f64..5.0,
            theta_gamma in 0.2f64..3.0,
        ) {
            let n = old.len();
            let mut p = MaterialParams::normalized();
            p.h_bottom = h;
            p.h_top = h;
            p.theta_gamma = theta_gamma;
            let dom = ColumnDomain::uniform(0.0, 1.0, n).unwrap();
            let z = vec![0.0; n];
            let chi = vec![1.0; n];
            let new = update_theta(&old, &quiet(&z, &chi, &z), dt, dt, &p, &dom, 1e-10).unwrap();
            let lo = old.iter().cloned().fold(theta_gamma, f64::min);
            let hi = old.iter().cloned().fold(theta_gamma, f64::max);
            for t in new {
                prop_assert!(t >= lo - 1e-12 && t <= hi + 1e-12);
            }
        }
    }
}
