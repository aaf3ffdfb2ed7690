//! Time integration.
//!
//! One step of the production scheme is split as phase → volume increment →
//! temperature, each sub-update being linear and unconditionally solvable:
//!
//! * [`chi_resolvent`] applies the exact resolvent of `α²λ id + ∂I` after the
//!   explicit forcing, so the constraint `χ ∈ [0, 1]` holds exactly;
//! * [`update_u`] is a diagonal backward Euler step with a zero-mean right
//!   hand side;
//! * [`update_theta`] is an implicit finite-volume heat step with Robin ends.
//!
//! [`gradient_flow_step`] and [`picard_solve`] are alternative constructions
//! kept as verification oracles.

mod gradient_flow;
mod heat;
mod picard;

pub use gradient_flow::{gradient_flow_forcing, gradient_flow_potential, gradient_flow_step};
pub use heat::{boundary_heat_supply, exchange_coefficients, update_theta, HeatSources};
pub use picard::{picard_solve, PicardSolution};

use crate::error::{Error, Result};
use crate::model::{ColumnDomain, MaterialParams, StateField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    CoupledSemiImplicit,
    Picard,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coupled_semi_implicit" | "coupled" => Some(Scheme::CoupledSemiImplicit),
            "picard" => Some(Scheme::Picard),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::CoupledSemiImplicit => "coupled_semi_implicit",
            Scheme::Picard => "picard",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Truncation level of the temperature cutoff (Picard mode).
    pub r_cutoff: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Length of each Picard window; the whole horizon when `None`.
    pub picard_window: Option<f64>,
    pub linear_tol: f64,
    /// Steps between stored samples.
    pub sample_stride: usize,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::CoupledSemiImplicit,
            r_cutoff: f64::INFINITY,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            picard_window: None,
            linear_tol: 1e-10,
            sample_stride: 100,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self, p: &MaterialParams) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid("t_end", format!("must be nonnegative, got {}", self.t_end)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::invalid("picard_tol", "must be positive"));
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::invalid("linear_tol", "must be positive"));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::invalid("picard_max_iter", "must be at least 1"));
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample_stride", "must be at least 1"));
        }
        if let Some(w) = self.picard_window {
            if !(w > 0.0) {
                return Err(Error::invalid("picard_window", "must be positive"));
            }
        }
        if self.scheme == Scheme::Picard && !(self.r_cutoff > p.theta_gamma) {
            return Err(Error::invalid(
                "r_cutoff",
                format!("must exceed theta_gamma = {} in picard mode", p.theta_gamma),
            ));
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_end]`: all equal to `dt` except possibly a
    /// shorter last one.
    pub fn step_sizes(&self) -> Vec<f64> {
        step_sizes(self.dt, self.t_end)
    }
}

pub(crate) fn step_sizes(dt: f64, t_end: f64) -> Vec<f64> {
    if t_end <= 0.0 {
        return Vec::new();
    }
    let n = ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut steps = vec![dt; n];
    steps[n - 1] = t_end - (n - 1) as f64 * dt;
    steps
}

/// Which side of the constraint `χ ∈ [0, 1]` is active in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBound {
    Lower,
    Free,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiUpdate {
    pub chi_new: Vec<f64>,
    pub chi_t: Vec<f64>,
    pub active_set: Vec<ActiveBound>,
    /// Selection of `∂I(χ_new)` realized by the clamp: `≤ 0` at the lower
    /// bound, `≥ 0` at the upper bound, zero in between.
    pub multiplier: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub u_t: Vec<f64>,
    pub chi_t: Vec<f64>,
    pub active_set: Vec<ActiveBound>,
    pub picard_iters: usize,
    pub max_theta: f64,
    pub min_theta: f64,
}

/// Phase update. Solves
/// `γ (χ_new - χ_old)/dt + αλ(U - α(1 - χ_new)) + L(1 - θ/θ_c) + ξ = 0`,
/// `ξ ∈ ∂I(χ_new)`, with `U` and `θ` lagged.
pub fn chi_resolvent(
    chi_old: &[f64],
    u_used: &[f64],
    theta_used: &[f64],
    dt: f64,
    p: &MaterialParams,
) -> ChiUpdate {
    let n = chi_old.len();
    let stiffness = p.alpha * p.alpha * p.lambda;
    let denom = p.gamma / dt + stiffness;
    let mut out = ChiUpdate {
        chi_new: Vec::with_capacity(n),
        chi_t: Vec::with_capacity(n),
        active_set: Vec::with_capacity(n),
        multiplier: Vec::with_capacity(n),
    };
    for i in 0..n {
        let num = p.gamma * chi_old[i] / dt - p.alpha * p.lambda * u_used[i]
            + stiffness
            + p.latent_heat * (theta_used[i] / p.theta_c - 1.0);
        let unconstrained = num / denom;
        let (chi, flag) = if unconstrained <= 0.0 {
            (0.0, ActiveBound::Lower)
        } else if unconstrained >= 1.0 {
            (1.0, ActiveBound::Upper)
        } else {
            (unconstrained, ActiveBound::Free)
        };
        let xi = if flag == ActiveBound::Free { 0.0 } else { num - denom * chi };
        out.chi_new.push(chi);
        out.chi_t.push((chi - chi_old[i]) / dt);
        out.active_set.push(flag);
        out.multiplier.push(xi);
    }
    out
}

/// Volume-increment update: backward Euler on
/// `ν U_t + λ U = αλ(1-χ) + β(θ-θ_c) + ρ0 g (x3 - m) - mean(αλ(1-χ) + β(θ-θ_c))`.
/// Returns `(U_new, U_t)`; `U_new` has zero volume mean.
pub fn update_u(
    u_old: &[f64],
    chi_new: &[f64],
    theta_used: &[f64],
    dt: f64,
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> (Vec<f64>, Vec<f64>) {
    let n = dom.n_cells;
    let local: Vec<f64> = (0..n)
        .map(|i| p.alpha * p.lambda * (1.0 - chi_new[i]) + p.beta * (theta_used[i] - p.theta_c))
        .collect();
    let mean_local = dom.mean(&local);
    let denom = p.nu / dt + p.lambda;
    let mut u_new: Vec<f64> = (0..n)
        .map(|i| {
            let rhs = local[i] - mean_local + p.rho0 * p.g * (dom.z_centers[i] - dom.m);
            (p.nu * u_old[i] / dt + rhs) / denom
        })
        .collect();
    let drift = dom.mean(&u_new);
    for u in &mut u_new {
        *u -= drift;
    }
    let u_t = u_new.iter().zip(u_old).map(|(a, b)| (a - b) / dt).collect();
    (u_new, u_t)
}

/// One step of the split scheme χ → U → θ. The input state is never
/// modified; a rejected step returns the error only.
pub fn step_coupled(
    state: &StateField,
    dt: f64,
    p: &MaterialParams,
    dom: &ColumnDomain,
    cfg: &StepperConfig,
) -> Result<(StateField, StepReport)> {
    let chi = chi_resolvent(&state.chi, &state.u, &state.theta, dt, p);
    let (u_new, u_t) = update_u(&state.u, &chi.chi_new, &state.theta, dt, p, dom);
    let t_new = state.t + dt;
    let theta_new = update_theta(
        &state.theta,
        &HeatSources {
            u_new: &u_new,
            chi_new: &chi.chi_new,
            u_t: &u_t,
            chi_t: &chi.chi_t,
            thermal_stress_theta: None,
        },
        dt,
        t_new,
        p,
        dom,
        cfg.linear_tol,
    )?;
    let (min_theta, max_theta) = extremes(&theta_new);
    let report = StepReport {
        dt,
        u_t,
        chi_t: chi.chi_t,
        active_set: chi.active_set,
        picard_iters: 0,
        max_theta,
        min_theta,
    };
    Ok((
        StateField {
            theta: theta_new,
            u: u_new,
            chi: chi.chi_new,
            t: t_new,
        },
        report,
    ))
}

pub(crate) fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// The heat source of the phase/volume coupling evaluated two ways from the
/// quantities of one phase update:
///
/// * direct: `ν U_t² - β θ U_t - (αλ(U - α(1-χ_new)) + L) χ_t`
/// * rewritten with the phase inclusion:
///   `ν U_t² - β θ U_t + γ χ_t² - (L/θ_c) θ χ_t + ξ χ_t`
///
/// `U` and `θ` are the lagged values the phase update used. The two agree to
/// roundoff; the `ξ χ_t` term vanishes in the continuum but not when a cell
/// reaches a bound within a step.
pub fn source_identity_forms(
    state: &StateField,
    dt: f64,
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> (Vec<f64>, Vec<f64>) {
    let chi = chi_resolvent(&state.chi, &state.u, &state.theta, dt, p);
    let (_, u_t) = update_u(&state.u, &chi.chi_new, &state.theta, dt, p, dom);
    let n = dom.n_cells;
    let mut direct = Vec::with_capacity(n);
    let mut rewritten = Vec::with_capacity(n);
    for i in 0..n {
        let theta = state.theta[i];
        let chi_t = chi.chi_t[i];
        let mech = p.nu * u_t[i] * u_t[i] - p.beta * theta * u_t[i];
        let q = state.u[i] - p.alpha * (1.0 - chi.chi_new[i]);
        direct.push(mech - (p.alpha * p.lambda * q + p.latent_heat) * chi_t);
        rewritten.push(
            mech + p.gamma * chi_t * chi_t - p.latent_heat / p.theta_c * theta * chi_t
                + chi.multiplier[i] * chi_t,
        );
    }
    (direct, rewritten)
}

/// Per-step notification handed to [`run`] observers.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub step: usize,
    pub before: &'a StateField,
    pub after: &'a StateField,
    pub report: &'a StepReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub state: StateField,
    /// Absent for the initial sample.
    pub report: Option<StepReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: StateField,
    /// Initial state, every `sample_stride`-th step, and the final state.
    pub samples: Vec<Sample>,
    pub steps_taken: usize,
    /// Set when a step was rejected; `final_state` is then the last accepted state.
    pub failure: Option<Error>,
}

/// Advances from `state0.t` over `cfg.t_end`. The observer sees every
/// accepted step; samples are stored every `cfg.sample_stride` steps.
pub fn run(
    state0: &StateField,
    cfg: &StepperConfig,
    p: &MaterialParams,
    dom: &ColumnDomain,
    mut observer: impl FnMut(&StepEvent<'_>),
) -> Result<RunOutcome> {
    p.validate()?;
    cfg.validate(p)?;
    state0.validate(dom)?;
    let steps = cfg.step_sizes();
    let mut samples = vec![Sample {
        step: 0,
        state: state0.clone(),
        report: None,
    }];
    let mut current = state0.clone();
    let mut failure = None;
    let mut taken = 0;

    let mut record = |k: usize, before: &StateField, after: &StateField, report: &StepReport| {
        observer(&StepEvent {
            step: k,
            before,
            after,
            report,
        });
        if k % cfg.sample_stride == 0 || k == steps.len() {
            samples.push(Sample {
                step: k,
                state: after.clone(),
                report: Some(report.clone()),
            });
        }
    };

    match cfg.scheme {
        Scheme::CoupledSemiImplicit => {
            for (k, &dt) in steps.iter().enumerate() {
                match step_coupled(&current, dt, p, dom, cfg) {
                    Ok((next, report)) => {
                        record(k + 1, &current, &next, &report);
                        current = next;
                        taken = k + 1;
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
        }
        Scheme::Picard => {
            let window = cfg.picard_window.unwrap_or(cfg.t_end).max(cfg.dt);
            let per_window = ((window / cfg.dt).round() as usize).max(1);
            let mut k = 0;
            while k < steps.len() {
                let chunk = &steps[k..(k + per_window).min(steps.len())];
                match picard::picard_solve_steps(&current, chunk, p, dom, cfg) {
                    Ok(sol) => {
                        let mut before = current.clone();
                        for (j, (state, report)) in
                            sol.states.into_iter().zip(sol.reports).enumerate()
                        {
                            record(k + j + 1, &before, &state, &report);
                            before = state;
                        }
                        current = before;
                        k += chunk.len();
                        taken = k;
                    }
                    Err(e) => {
                        failure = Some(e);
                        break;
                    }
                }
            }
        }
    }
    if failure.is_some() && samples.last().map(|s| s.step) != Some(taken) {
        samples.push(Sample {
            step: taken,
            state: current.clone(),
            report: None,
        });
    }
    Ok(RunOutcome {
        final_state: current,
        samples,
        steps_taken: taken,
        failure,
    })
}
