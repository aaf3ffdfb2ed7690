//! Thermodynamic audits of discrete trajectories.
//!
//! Series functions take one [`DiagnosticsRecord`] per accepted step,
//! preceded by the record of the initial state (use [`Recorder`] as a
//! [`run`](crate::evolution::run) observer). Boundary terms use the exchange
//! coefficients the heat step applies, so balances close at the discrete level.

use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::evolution::{exchange_coefficients, StepEvent};
use crate::model::{ColumnDomain, MaterialParams, StateField};
use crate::thermo;

/// L² norms of the rates and of the discrete temperature gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateNorms {
    pub theta_t: f64,
    pub u_t: f64,
    pub chi_t: f64,
    pub grad_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Length of the step that produced this record; zero for the initial state.
    pub dt: f64,
    /// `∫ (ρ0 e - ρ0 g x3 U)`.
    pub total_energy_ext: f64,
    /// `∫_∂Ω h (θ_Γ - θ)`.
    pub boundary_energy_flux: f64,
    pub entropy_total: f64,
    /// `∫ (κ|∇θ|²/θ² + γχ_t²/θ + νU_t²/θ)`.
    pub entropy_production: f64,
    /// `∫_∂Ω h (θ_Γ - θ)/θ`.
    pub entropy_boundary_supply: f64,
    pub lyapunov: f64,
    /// `∫_∂Ω h (θ - θ_Γ)²/θ`.
    pub lyapunov_boundary_loss: f64,
    pub rate_norms: RateNorms,
    /// `∫_∂Ω h (θ - θ_Γ)²`.
    pub boundary_defect: f64,
    pub interface_l1_weighted: Option<f64>,
    pub mean_u: f64,
    pub max_abs_u: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub min_chi: f64,
    pub max_chi: f64,
    pub max_abs_u_t: f64,
    pub max_abs_chi_t: f64,
}

/// `Σ_faces A_face dz (Δθ/dz)²` and the same with the weight `1/(θ_i θ_{i+1})`.
fn gradient_integrals(theta: &[f64], dom: &ColumnDomain) -> (f64, f64) {
    let mut plain = 0.0;
    let mut weighted = 0.0;
    for i in 0..dom.n_cells.saturating_sub(1) {
        let g = (theta[i + 1] - theta[i]) / dom.dz;
        let w = dom.face_area(i) * dom.dz * g * g;
        plain += w;
        weighted += w / (theta[i] * theta[i + 1]);
    }
    (plain, weighted)
}

impl DiagnosticsRecord {
    /// Record of `state`, reached by a step of length `dt` from `previous`
    /// with the given rates (`None` for a state at rest or the initial state).
    pub fn evaluate(
        state: &StateField,
        previous: Option<&StateField>,
        rates: Option<(&[f64], &[f64])>,
        dt: f64,
        p: &MaterialParams,
        dom: &ColumnDomain,
        eq: Option<&EquilibriumSolution>,
    ) -> Self {
        let n = dom.n_cells;
        let zeros = vec![0.0; n];
        let (u_t, chi_t) = rates.unwrap_or((&zeros, &zeros));
        let exchange = exchange_coefficients(p, dom);
        let mut flux = 0.0;
        let mut entropy_supply = 0.0;
        let mut lyap_loss = 0.0;
        let mut defect = 0.0;
        for i in 0..n {
            let gap = p.theta_gamma - state.theta[i];
            flux += exchange[i] * gap;
            entropy_supply += exchange[i] * gap / state.theta[i];
            lyap_loss += exchange[i] * gap * gap / state.theta[i];
            defect += exchange[i] * gap * gap;
        }
        let (grad_sq, grad_weighted) = gradient_integrals(&state.theta, dom);
        let production = p.kappa * grad_weighted
            + dom.integrate_with(|i| {
                (p.gamma * chi_t[i] * chi_t[i] + p.nu * u_t[i] * u_t[i]) / state.theta[i]
            });
        let theta_t_sq = match previous {
            Some(prev) if dt > 0.0 => {
                dom.integrate_with(|i| ((state.theta[i] - prev.theta[i]) / dt).powi(2))
            }
            _ => 0.0,
        };
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (min_theta, max_theta) = min_max(&state.theta);
        let (min_chi, max_chi) = min_max(&state.chi);
        DiagnosticsRecord {
            t: state.t,
            dt,
            total_energy_ext: thermo::total_energy_with_gravity(state, p, dom),
            boundary_energy_flux: flux,
            entropy_total: thermo::total_entropy(state, p, dom),
            entropy_production: production,
            entropy_boundary_supply: entropy_supply,
            lyapunov: thermo::extended_energy(state, p, dom),
            lyapunov_boundary_loss: lyap_loss,
            rate_norms: RateNorms {
                theta_t: theta_t_sq.sqrt(),
                u_t: dom.integrate_with(|i| u_t[i] * u_t[i]).sqrt(),
                chi_t: dom.integrate_with(|i| chi_t[i] * chi_t[i]).sqrt(),
                grad_theta: grad_sq.sqrt(),
            },
            boundary_defect: defect,
            interface_l1_weighted: eq.map(|e| interface_weighted_l1(&state.chi, e, dom)),
            mean_u: dom.mean(&state.u),
            max_abs_u: max_abs(&state.u),
            min_theta,
            max_theta,
            min_chi,
            max_chi,
            max_abs_u_t: max_abs(u_t),
            max_abs_chi_t: max_abs(chi_t),
        }
    }

    pub fn from_event(
        event: &StepEvent<'_>,
        p: &MaterialParams,
        dom: &ColumnDomain,
        eq: Option<&EquilibriumSolution>,
    ) -> Self {
        Self::evaluate(
            event.after,
            Some(event.before),
            Some((&event.report.u_t, &event.report.chi_t)),
            event.report.dt,
            p,
            dom,
            eq,
        )
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// `∫ |χ∞ - χ| |m + G0 ell Z - x3| dx`.
pub fn interface_weighted_l1(chi: &[f64], eq: &EquilibriumSolution, dom: &ColumnDomain) -> f64 {
    dom.integrate_with(|i| {
        (eq.chi_inf[i] - chi[i]).abs() * (eq.interface_height - dom.z_centers[i]).abs()
    })
}

/// Collects one record per step; meant to be driven from a run observer.
#[derive(Debug, Clone)]
pub struct Recorder<'a> {
    p: &'a MaterialParams,
    dom: &'a ColumnDomain,
    eq: Option<&'a EquilibriumSolution>,
    pub records: Vec<DiagnosticsRecord>,
}

impl<'a> Recorder<'a> {
    pub fn new(
        state0: &StateField,
        p: &'a MaterialParams,
        dom: &'a ColumnDomain,
        eq: Option<&'a EquilibriumSolution>,
    ) -> Self {
        Recorder {
            p,
            dom,
            eq,
            records: vec![DiagnosticsRecord::evaluate(state0, None, None, 0.0, p, dom, eq)],
        }
    }

    pub fn observe(&mut self, event: &StepEvent<'_>) {
        self.records
            .push(DiagnosticsRecord::from_event(event, self.p, self.dom, self.eq));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancePoint {
    pub t: f64,
    pub residual: f64,
    /// Magnitude the residual is compared against.
    pub scale: f64,
}

/// Per step `Δ∫(ρ0 e - ρ0 g x3 U)/Δt - ∫_∂Ω h(θ_Γ - θ)`, with the flux at the
/// new level as applied by the implicit heat step.
pub fn energy_balance_residual(records: &[DiagnosticsRecord]) -> Vec<BalancePoint> {
    records
        .windows(2)
        .map(|w| {
            let rate = (w[1].total_energy_ext - w[0].total_energy_ext) / w[1].dt;
            BalancePoint {
                t: w[1].t,
                residual: rate - w[1].boundary_energy_flux,
                scale: w[1].boundary_energy_flux.abs(),
            }
        })
        .collect()
}

/// `Σ dt |r_k|`, the time-integrated energy-balance residual.
pub fn integrated_energy_residual(records: &[DiagnosticsRecord]) -> f64 {
    energy_balance_residual(records)
        .iter()
        .zip(records.iter().skip(1))
        .map(|(r, rec)| rec.dt * r.residual.abs())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPoint {
    pub t: f64,
    pub production: f64,
    /// `ΔS/Δt - ∫_∂Ω h(θ_Γ - θ)/θ - D`.
    pub defect: f64,
}

pub fn entropy_production_series(records: &[DiagnosticsRecord]) -> Vec<EntropyPoint> {
    records
        .windows(2)
        .map(|w| EntropyPoint {
            t: w[1].t,
            production: w[1].entropy_production,
            defect: (w[1].entropy_total - w[0].entropy_total) / w[1].dt
                - w[1].entropy_boundary_supply
                - w[1].entropy_production,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub values: Vec<f64>,
    /// Largest single-step increase (negative when strictly decreasing).
    pub max_increase: f64,
    /// Steps whose increase exceeded the allowed slack.
    pub violations: Vec<usize>,
    /// `Φ(0) - Φ(T)`.
    pub total_drop: f64,
    /// `Σ dt (θ_Γ D + ∫ h(θ-θ_Γ)²/θ)`, the drop predicted by the continuum balance.
    pub predicted_drop: f64,
}

/// Slack allowed for one step: `slack_factor · dt` times the dissipation of
/// that step, plus a roundoff floor relative to `|Φ|`.
pub fn lyapunov_slack(rec: &DiagnosticsRecord, theta_gamma: f64, slack_factor: f64) -> f64 {
    let step_dissipation = rec.dt * (theta_gamma * rec.entropy_production + rec.lyapunov_boundary_loss);
    slack_factor * rec.dt * step_dissipation + 1e-12 * rec.lyapunov.abs().max(1.0)
}

pub fn lyapunov_series(records: &[DiagnosticsRecord], theta_gamma: f64, slack_factor: f64) -> LyapunovReport {
    let values: Vec<f64> = records.iter().map(|r| r.lyapunov).collect();
    let mut max_increase = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut predicted = 0.0;
    for (k, w) in records.windows(2).enumerate() {
        let inc = w[1].lyapunov - w[0].lyapunov;
        max_increase = max_increase.max(inc);
        if inc > lyapunov_slack(&w[1], theta_gamma, slack_factor) {
            violations.push(k + 1);
        }
        predicted += w[1].dt * (theta_gamma * w[1].entropy_production + w[1].lyapunov_boundary_loss);
    }
    LyapunovReport {
        total_drop: values.first().copied().unwrap_or(0.0) - values.last().copied().unwrap_or(0.0),
        values,
        max_increase: if records.len() < 2 { 0.0 } else { max_increase },
        violations,
        predicted_drop: predicted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityMetrics {
    /// `∫ (U_t² + χ_t² + |∇θ|²)`.
    pub rate_norm_sq: f64,
    /// `∫_∂Ω h (θ - θ_Γ)²`.
    pub boundary_defect: f64,
    /// `(∫(θ-θ_Γ)² + ∫|∇θ|²)^{1/2}` with face differences.
    pub theta_w12: f64,
    pub chi_l1: f64,
    pub u_l1: f64,
    pub interface_l1_weighted: f64,
}

pub fn stationarity_metrics(
    state: &StateField,
    u_t: &[f64],
    chi_t: &[f64],
    p: &MaterialParams,
    dom: &ColumnDomain,
    eq: &EquilibriumSolution,
) -> Result<StationarityMetrics> {
    dom.check_len("theta", &state.theta)?;
    dom.check_len("u", &state.u)?;
    dom.check_len("chi", &state.chi)?;
    dom.check_len("u_t", u_t)?;
    dom.check_len("chi_t", chi_t)?;
    if eq.chi_inf.len() != dom.n_cells || eq.u_inf.len() != dom.n_cells {
        return Err(Error::ShapeMismatch {
            field: "equilibrium",
            expected: dom.n_cells,
            found: eq.chi_inf.len(),
        });
    }
    let (grad_sq, _) = gradient_integrals(&state.theta, dom);
    let exchange = exchange_coefficients(p, dom);
    let boundary_defect = exchange
        .iter()
        .zip(&state.theta)
        .map(|(k, th)| k * (th - p.theta_gamma).powi(2))
        .sum();
    Ok(StationarityMetrics {
        rate_norm_sq: dom.integrate_with(|i| u_t[i] * u_t[i] + chi_t[i] * chi_t[i]) + grad_sq,
        boundary_defect,
        theta_w12: (dom.integrate_with(|i| (state.theta[i] - p.theta_gamma).powi(2)) + grad_sq).sqrt(),
        chi_l1: dom.integrate_with(|i| (state.chi[i] - eq.chi_inf[i]).abs()),
        u_l1: dom.integrate_with(|i| (state.u[i] - eq.u_inf[i]).abs()),
        interface_l1_weighted: interface_weighted_l1(&state.chi, eq, dom),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub max_theta: f64,
    pub min_theta: f64,
    pub max_abs_u: f64,
    pub max_abs_u_t: f64,
    pub max_abs_chi_t: f64,
    /// Least-squares slope of the per-record maximum temperature over the
    /// final half of the trajectory.
    pub final_half_slope: f64,
    /// `final_half_slope ≤ 1e-8 · max_theta` per unit time.
    pub no_growth: bool,
}

pub fn bounds_monitor(records: &[DiagnosticsRecord]) -> BoundsReport {
    let mut rep = BoundsReport {
        max_theta: f64::NEG_INFINITY,
        min_theta: f64::INFINITY,
        max_abs_u: 0.0,
        max_abs_u_t: 0.0,
        max_abs_chi_t: 0.0,
        final_half_slope: 0.0,
        no_growth: true,
    };
    for r in records {
        rep.max_theta = rep.max_theta.max(r.max_theta);
        rep.min_theta = rep.min_theta.min(r.min_theta);
        rep.max_abs_u = rep.max_abs_u.max(r.max_abs_u);
        rep.max_abs_u_t = rep.max_abs_u_t.max(r.max_abs_u_t);
        rep.max_abs_chi_t = rep.max_abs_chi_t.max(r.max_abs_chi_t);
    }
    let tail = &records[records.len() / 2..];
    if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mt = tail.iter().map(|r| r.t).sum::<f64>() / n;
        let mv = tail.iter().map(|r| r.max_theta).sum::<f64>() / n;
        let sxx: f64 = tail.iter().map(|r| (r.t - mt).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|r| (r.t - mt) * (r.max_theta - mv)).sum();
        if sxx > 0.0 {
            rep.final_half_slope = sxy / sxx;
        }
    }
    rep.no_growth = rep.final_half_slope <= 1e-8 * rep.max_theta.abs();
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium;
    use crate::evolution::{run, StepperConfig};

    fn eq_state(p: &MaterialParams, dom: &ColumnDomain) -> (StateField, EquilibriumSolution) {
        let eq = equilibrium::discrete_equilibrium(p, dom, p.theta_gamma).unwrap();
        (
            StateField {
                theta: vec![p.theta_gamma; dom.n_cells],
                u: eq.u_inf.clone(),
                chi: eq.chi_inf.clone(),
                t: 0.0,
            },
            eq,
        )
    }

    fn record_run(
        s0: &StateField,
        cfg: &StepperConfig,
        p: &MaterialParams,
        dom: &ColumnDomain,
    ) -> Vec<DiagnosticsRecord> {
        let mut rec = Recorder::new(s0, p, dom, None);
        let out = run(s0, cfg, p, dom, |e| rec.observe(e)).unwrap();
        assert!(out.failure.is_none());
        rec.records
    }

    #[test]
    fn equilibrium_is_silent() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 32).unwrap();
        let (s0, eq) = eq_state(&p, &dom);
        let cfg = StepperConfig {
            dt: 0.01,
            t_end: 0.2,
            ..StepperConfig::default()
        };
        let records = record_run(&s0, &cfg, &p, &dom);
        for r in energy_balance_residual(&records) {
            assert!(r.residual.abs() <= 1e-10);
        }
        // exact at rest; stepper rates carry roundoff
        let at_rest = DiagnosticsRecord::evaluate(&s0, None, None, 0.0, &p, &dom, Some(&eq));
        assert_eq!(at_rest.entropy_production, 0.0);
        for e in entropy_production_series(&records) {
            assert!(e.production <= 1e-24);
        }
        let lyap = lyapunov_series(&records, p.theta_gamma, 2.0);
        assert!(lyap.violations.is_empty());
        assert!(lyap.values.iter().all(|v| (v - lyap.values[0]).abs() < 1e-12));
        let m = stationarity_metrics(&s0, &vec![0.0; 32], &vec![0.0; 32], &p, &dom, &eq).unwrap();
        assert_eq!(m.rate_norm_sq, 0.0);
        assert_eq!(m.chi_l1, 0.0);
        assert_eq!(m.u_l1, 0.0);
        assert_eq!(m.theta_w12, 0.0);
        assert_eq!(m.interface_l1_weighted, 0.0);
        let b = bounds_monitor(&records);
        assert!((b.max_theta - p.theta_gamma).abs() < 1e-12);
        assert!((b.min_theta - p.theta_gamma).abs() < 1e-12);
    }

    #[test]
    fn production_is_nonnegative_and_lyapunov_decreases() {
        let p = MaterialParams {
            theta_gamma: 0.9,
            ..MaterialParams::normalized()
        };
        let dom = ColumnDomain::uniform(0.0, 1.0, 32).unwrap();
        let s0 = StateField::uniform(&dom, 1.2, 0.0, 0.5);
        let cfg = StepperConfig {
            dt: 1e-3,
            t_end: 2.0,
            ..StepperConfig::default()
        };
        let records = record_run(&s0, &cfg, &p, &dom);
        assert!(records.iter().all(|r| r.entropy_production >= 0.0));
        let lyap = lyapunov_series(&records, p.theta_gamma, 2.0);
        assert!(lyap.violations.is_empty(), "max increase {}", lyap.max_increase);
        assert!(lyap.total_drop > 0.0);
        // drop matches the dissipation integral to first order
        assert!((lyap.total_drop - lyap.predicted_drop).abs() < 0.05 * lyap.total_drop);
    }

    #[test]
    fn energy_residual_is_first_order() {
        let p = MaterialParams {
            theta_gamma: 0.9,
            ..MaterialParams::normalized()
        };
        let dom = ColumnDomain::uniform(0.0, 1.0, 32).unwrap();
        let s0 = StateField::uniform(&dom, 1.2, 0.0, 0.5);
        let res: Vec<f64> = [2e-3, 1e-3]
            .iter()
            .map(|&dt| {
                let cfg = StepperConfig {
                    dt,
                    t_end: 0.5,
                    ..StepperConfig::default()
                };
                integrated_energy_residual(&record_run(&s0, &cfg, &p, &dom))
            })
            .collect();
        let order = (res[0] / res[1]).log2();
        assert!(order >= 0.8, "order {order}, {res:?}");
    }

    #[test]
    fn weighted_norm_of_interface_cell_defect() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 64).unwrap();
        let eq = equilibrium::discrete_equilibrium(&p, &dom, 1.0).unwrap();
        // cell next to the interface flipped
        let j = dom
            .z_centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - eq.interface_height)
                    .abs()
                    .total_cmp(&(b.1 - eq.interface_height).abs())
            })
            .unwrap()
            .0;
        let mut chi = eq.chi_inf.clone();
        chi[j] = 1.0 - chi[j];
        let w = interface_weighted_l1(&chi, &eq, &dom);
        assert!(w <= dom.dz * dom.cell_volume(j));
        assert!(w > 0.0);
    }

    #[test]
    fn metrics_are_lipschitz_in_the_state() {
        use rand::{Rng, SeedableRng};
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 16).unwrap();
        let (s0, eq) = eq_state(&p, &dom);
        let zeros = vec![0.0; 16];
        let base = stationarity_metrics(&s0, &zeros, &zeros, &p, &dom, &eq).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for eps in [1e-3, 1e-5] {
            let mut s = s0.clone();
            for i in 0..16 {
                s.theta[i] += eps * rng.gen_range(-1.0..1.0);
                s.u[i] += eps * rng.gen_range(-1.0..1.0);
                s.chi[i] = (s.chi[i] + eps * rng.gen_range(-1.0..1.0)).clamp(0.0, 1.0);
            }
            let m = stationarity_metrics(&s, &zeros, &zeros, &p, &dom, &eq).unwrap();
            let c = 100.0;
            assert!((m.chi_l1 - base.chi_l1).abs() <= c * eps);
            assert!((m.u_l1 - base.u_l1).abs() <= c * eps);
            assert!((m.theta_w12 - base.theta_w12).abs() <= c * eps);
            assert!((m.interface_l1_weighted - base.interface_l1_weighted).abs() <= c * eps);
            assert!((m.boundary_defect - base.boundary_defect).abs() <= c * eps);
        }
    }

    #[test]
    fn mismatched_equilibrium_is_rejected() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 16).unwrap();
        let other = ColumnDomain::uniform(0.0, 1.0, 8).unwrap();
        let (_, eq) = eq_state(&p, &other);
        let s = StateField::uniform(&dom, 1.0, 0.0, 1.0);
        let z = vec![0.0; 16];
        assert!(matches!(
            stationarity_metrics(&s, &z, &z, &p, &dom, &eq),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
