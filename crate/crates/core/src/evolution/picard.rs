//! Fixed-point construction for the truncated system: freeze a temperature
//! trajectory, advance `(U, χ)` against its cutoff `Q_R`, solve the heat
//! equation with the frozen coefficients, repeat until the temperature
//! trajectory stops changing.

use super::heat::{update_theta, HeatSources};
use super::{chi_resolvent, extremes, step_sizes, update_u, StepReport, StepperConfig};
use crate::error::{Error, Result};
use crate::model::{ColumnDomain, MaterialParams, StateField};

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    /// State after each step of the fixed-point trajectory.
    pub states: Vec<StateField>,
    pub reports: Vec<StepReport>,
    pub iterations: usize,
    /// Discrete `L²(Ω × (0, T))` distance between successive temperature
    /// trajectories, one entry per iteration.
    pub distances: Vec<f64>,
    /// Ratios of successive distances.
    pub factors: Vec<f64>,
    /// The cutoff clipped the input temperature somewhere in the last iteration.
    pub saturated: bool,
}

/// `Q_R(θ) = min(max(θ, 0), R)`.
fn cutoff(theta: &[f64], r: f64) -> (Vec<f64>, bool) {
    let mut clipped = false;
    let out = theta
        .iter()
        .map(|&t| {
            let q = t.max(0.0).min(r);
            clipped |= q != t;
            q
        })
        .collect();
    (out, clipped)
}

pub fn picard_solve(
    state0: &StateField,
    t_horizon: f64,
    dt: f64,
    p: &MaterialParams,
    dom: &ColumnDomain,
    cfg: &StepperConfig,
) -> Result<PicardSolution> {
    p.validate()?;
    state0.validate(dom)?;
    picard_solve_steps(state0, &step_sizes(dt, t_horizon), p, dom, cfg)
}

pub(crate) fn picard_solve_steps(
    state0: &StateField,
    steps: &[f64],
    p: &MaterialParams,
    dom: &ColumnDomain,
    cfg: &StepperConfig,
) -> Result<PicardSolution> {
    let r = cfg.r_cutoff;
    // temperature levels 0..=K of the frozen input trajectory
    let mut input: Vec<Vec<f64>> = vec![state0.theta.clone(); steps.len() + 1];
    let mut distances = Vec::new();
    let mut factors = Vec::new();

    for iteration in 1..=cfg.picard_max_iter {
        let mut states = Vec::with_capacity(steps.len());
        let mut reports = Vec::with_capacity(steps.len());
        let mut saturated = false;
        let mut current = state0.clone();
        let mut dist_sq = 0.0;
        for (k, &dt) in steps.iter().enumerate() {
            let (theta_old, c0) = cutoff(&input[k], r);
            let (theta_new_in, c1) = cutoff(&input[k + 1], r);
            saturated |= c0 || c1;
            let chi = chi_resolvent(&current.chi, &current.u, &theta_old, dt, p);
            let (u_new, u_t) = update_u(&current.u, &chi.chi_new, &theta_old, dt, p, dom);
            let t_new = current.t + dt;
            let theta_new = update_theta(
                &current.theta,
                &HeatSources {
                    u_new: &u_new,
                    chi_new: &chi.chi_new,
                    u_t: &u_t,
                    chi_t: &chi.chi_t,
                    thermal_stress_theta: Some(&theta_new_in),
                },
                dt,
                t_new,
                p,
                dom,
                cfg.linear_tol,
            )?;
            dist_sq += dt * dom.integrate_with(|i| (theta_new[i] - input[k + 1][i]).powi(2));
            let (min_theta, max_theta) = extremes(&theta_new);
            reports.push(StepReport {
                dt,
                u_t,
                chi_t: chi.chi_t,
                active_set: chi.active_set,
                picard_iters: iteration,
                max_theta,
                min_theta,
            });
            current = StateField {
                theta: theta_new,
                u: u_new,
                chi: chi.chi_new,
                t: t_new,
            };
            states.push(current.clone());
        }
        let dist = dist_sq.sqrt();
        if let Some(&prev) = distances.last() {
            if prev > 0.0 {
                factors.push(dist / prev);
            }
        }
        distances.push(dist);
        for (k, s) in states.iter().enumerate() {
            input[k + 1].clone_from(&s.theta);
        }
        if dist <= cfg.picard_tol {
            for rep in &mut reports {
                rep.picard_iters = iteration;
            }
            return Ok(PicardSolution {
                states,
                reports,
                iterations: iteration,
                distances,
                factors,
                saturated,
            });
        }
    }
    Err(Error::PicardDiverged {
        iterations: cfg.picard_max_iter,
        factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium;
    use crate::evolution::step_coupled;

    fn cfg() -> StepperConfig {
        StepperConfig {
            r_cutoff: 10.0,
            picard_tol: 1e-12,
            picard_max_iter: 60,
            ..StepperConfig::default()
        }
    }

    #[test]
    fn equilibrium_converges_in_one_iteration() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 32).unwrap();
        let eq = equilibrium::discrete_equilibrium(&p, &dom, p.theta_gamma).unwrap();
        let s0 = StateField {
            theta: vec![p.theta_gamma; 32],
            u: eq.u_inf,
            chi: eq.chi_inf,
            t: 0.0,
        };
        let sol = picard_solve(&s0, 0.2, 0.01, &p, &dom, &cfg()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(!sol.saturated);
    }

    #[test]
    fn fixed_point_matches_coupled_stepper() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 16).unwrap();
        let mut s0 = StateField::uniform(&dom, 1.0, 0.0, 0.5);
        for (i, t) in s0.theta.iter_mut().enumerate() {
            *t = 1.0 + 0.2 * (i as f64 / 15.0);
        }
        let sol = picard_solve(&s0, 0.1, 0.01, &p, &dom, &cfg()).unwrap();
        let mut s = s0.clone();
        for picard_state in &sol.states {
            s = step_coupled(&s, 0.01, &p, &dom, &cfg()).unwrap().0;
            for i in 0..16 {
                assert!((s.theta[i] - picard_state.theta[i]).abs() < 1e-10);
            }
        }
        assert!(sol.factors.iter().all(|&f| f < 1.0), "{:?}", sol.factors);
    }

    #[test]
    fn low_cutoff_is_flagged() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 16).unwrap();
        let s0 = StateField::uniform(&dom, 1.5, 0.0, 0.5);
        let c = StepperConfig {
            r_cutoff: 1.2,
            ..cfg()
        };
        let sol = picard_solve(&s0, 0.1, 0.01, &p, &dom, &c).unwrap();
        assert!(sol.saturated);
    }

    #[test]
    fn iteration_cap_reports_factors() {
        let p = MaterialParams::normalized();
        let dom = ColumnDomain::uniform(0.0, 1.0, 8).unwrap();
        let s0 = StateField::uniform(&dom, 1.5, 0.0, 0.5);
        let c = StepperConfig {
            picard_max_iter: 2,
            picard_tol: 1e-30,
            ..cfg()
        };
        match picard_solve(&s0, 0.5, 0.01, &p, &dom, &c) {
            Err(Error::PicardDiverged { iterations, factors }) => {
                assert_eq!(iterations, 2);
                assert_eq!(factors.len(), 1);
            }
            other => panic!("expected divergence report, got {other:?}"),
        }
    }
}
