use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{
    entropy_production_series, integrated_energy_residual, lyapunov_series, DiagnosticsRecord,
    Recorder,
};
use crate::equilibrium::{self, ZeroGravityEquilibria};
use crate::error::{Error, Result};
use crate::evolution::{
    picard_solve, run, source_identity_forms, step_coupled, Scheme, StepperConfig,
};
use crate::model::{derive_dimensionless, ColumnDomain, MaterialParams, StateField};

use super::config::RunConfig;
use super::output::{
    fmt_float, time_label, write_snapshot, TrajectoryWriter, EQUILIBRIUM_HEADER,
    ZERO_GRAVITY_HEADER,
};

/// Process exit status for an error: `1` for configuration and input
/// problems, `2` for numerical failures.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::PositivityLoss { .. }
        | Error::LinearSolve { .. }
        | Error::PicardDiverged { .. }
        | Error::PhaseOutOfRange { .. } => 2,
        _ => 1,
    }
}

pub const EXIT_VERIFICATION_FAILED: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub steps_taken: usize,
    pub final_state: StateField,
    pub trajectory: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

fn snapshot_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("snapshot_{}.csv", time_label(t)))
}

/// Runs the configured simulation, streaming `trajectory.csv` and writing
/// snapshots into `out`. On a rejected step the outputs written so far and a
/// snapshot of the last accepted state are kept, then the error is returned.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulationSummary> {
    let dom = cfg.build_domain()?;
    let state0 = cfg.initial_state(&dom)?;
    fs::create_dir_all(out)?;
    let p = &cfg.params;
    let stepper = StepperConfig {
        sample_stride: cfg.sample_stride,
        ..cfg.stepper.clone()
    };
    let total_steps = stepper.step_sizes().len();

    let trajectory = out.join("trajectory.csv");
    let mut writer = TrajectoryWriter::create(&trajectory)?;
    let rec0 = DiagnosticsRecord::evaluate(&state0, None, None, 0.0, p, &dom, None);
    writer.append(&state0, &rec0, &dom)?;
    let mut snapshots = vec![snapshot_path(out, state0.t)];
    write_snapshot(&snapshots[0], &state0, &vec![0.0; dom.n_cells], p, &dom)?;

    let mut io_error = None;
    let mut last_u_t = vec![0.0; dom.n_cells];
    let outcome = run(&state0, &stepper, p, &dom, |event| {
        if io_error.is_some() {
            return;
        }
        let last = event.step == total_steps;
        let result = (|| -> Result<()> {
            if event.step % cfg.sample_stride == 0 || last {
                let rec = DiagnosticsRecord::from_event(event, p, &dom, None);
                writer.append(event.after, &rec, &dom)?;
            }
            if cfg.snapshot_stride > 0 && event.step % cfg.snapshot_stride == 0 && !last {
                let path = snapshot_path(out, event.after.t);
                write_snapshot(&path, event.after, &event.report.u_t, p, &dom)?;
                snapshots.push(path);
            }
            Ok(())
        })();
        last_u_t.clone_from(&event.report.u_t);
        if let Err(e) = result {
            io_error = Some(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let final_path = snapshot_path(out, outcome.final_state.t);
    write_snapshot(&final_path, &outcome.final_state, &last_u_t, p, &dom)?;
    snapshots.push(final_path);
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    Ok(SimulationSummary {
        steps_taken: outcome.steps_taken,
        final_state: outcome.final_state,
        trajectory,
        snapshots,
    })
}

/// Inclusive sweep `lo:hi:n` of boundary temperatures.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::invalid("sweep", format!("expected lo:hi:n, got `{spec}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::invalid(
            "sweep",
            "needs 0 < lo <= hi and at least one point",
        ));
    }
    Ok(if n == 1 {
        vec![lo]
    } else {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    })
}

/// Writes `equilibrium.csv` for each boundary temperature (the configured one
/// when `sweep` is empty). With `zero_gravity` the admissible sets of the
/// gravity-free problem are described instead.
pub fn cmd_equilibrium(
    cfg: &RunConfig,
    sweep: Option<&[f64]>,
    zero_gravity: bool,
    out: &Path,
) -> Result<PathBuf> {
    let dom = cfg.build_domain()?;
    let p = &cfg.params;
    let temps: Vec<f64> = match sweep {
        Some(s) => s.to_vec(),
        None => vec![p.theta_gamma],
    };
    fs::create_dir_all(out)?;
    let path = out.join("equilibrium.csv");
    let mut w = csv::Writer::from_path(&path)?;
    if zero_gravity {
        w.write_record(ZERO_GRAVITY_HEADER)?;
        for &tg in &temps {
            let set = equilibrium::zero_gravity_equilibrium_set(p, &dom, tg)?;
            let (regime, fraction) = match &set.equilibria {
                ZeroGravityEquilibria::UniquePureLiquid => ("unique_pure_liquid", 0.0),
                ZeroGravityEquilibria::UniquePureSolid => ("unique_pure_solid", 1.0),
                ZeroGravityEquilibria::Degenerate {
                    mean_solid_fraction,
                    ..
                } => ("degenerate", *mean_solid_fraction),
            };
            w.write_record([
                fmt_float(tg),
                regime.to_string(),
                fmt_float(set.interval.0),
                fmt_float(set.interval.1),
                fmt_float(fraction),
            ])?;
        }
    } else {
        w.write_record(EQUILIBRIUM_HEADER)?;
        for &tg in &temps {
            let sol = equilibrium::solve(p, &dom, tg)?;
            let cc = match equilibrium::clausius_clapeyron_residual(p, &dom, &sol) {
                Ok(r) => fmt_float(r),
                Err(Error::NotInterface) => String::new(),
                Err(e) => return Err(e),
            };
            w.write_record([
                fmt_float(tg),
                fmt_float(sol.z),
                sol.case_tag.as_str().to_string(),
                fmt_float(sol.interface_height),
                fmt_float(sol.solid_fraction),
                cc,
            ])?;
        }
    }
    w.flush()?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckOutcome {
            name,
            passed,
            detail,
        }
    }
}

/// Runs the property checks against the configuration. Numerical failures of
/// the embedded runs are returned as errors; failed checks are reported in
/// the table.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Vec<CheckOutcome>> {
    let dom = cfg.build_domain()?;
    let p = &cfg.params;
    let state0 = cfg.initial_state(&dom)?;
    let groups = derive_dimensionless(p, &dom);
    let mut checks = Vec::new();

    if groups.is_zero_gravity() {
        let set = equilibrium::zero_gravity_equilibrium_set(p, &dom, p.theta_gamma)?;
        let detail = format!(
            "zero gravity: mixed equilibria for theta_gamma in [{:.6e}, {:.6e}]",
            set.interval.0, set.interval.1
        );
        checks.push(CheckOutcome::new("equilibrium_set", true, detail));
    } else {
        checks.push(check_unique_root(p, &dom)?);
        checks.push(check_sweep_monotone(p, &dom)?);
        checks.push(check_fixed_point(p, &dom, &cfg.stepper)?);
    }
    checks.push(check_source_identity(&state0, p, &dom, cfg.stepper.dt));
    checks.extend(check_run(&state0, cfg, &dom)?);
    checks.push(check_picard(&state0, p, &dom, &cfg.stepper)?);
    checks.push(check_energy_order(&state0, p, &dom, &cfg.stepper)?);
    Ok(checks)
}

pub fn format_checks(checks: &[CheckOutcome]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "{:<width$}  {}  {}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    s
}

fn check_unique_root(p: &MaterialParams, dom: &ColumnDomain) -> Result<CheckOutcome> {
    let z = equilibrium::solve_z(p, dom, p.theta_gamma)?;
    let groups = derive_dimensionless(p, dom);
    let k = equilibrium::temperature_offset(p, &groups, p.theta_gamma);
    let n = 10_000;
    let (lo, hi) = (k - 0.5, k + 1.5);
    let mut crossings = 0;
    let mut prev = equilibrium::z_residual(p, dom, p.theta_gamma, lo);
    for i in 1..=n {
        let r = equilibrium::z_residual(p, dom, p.theta_gamma, lo + (hi - lo) * i as f64 / n as f64);
        if (prev < 0.0) != (r < 0.0) {
            crossings += 1;
        }
        prev = r;
    }
    let residual = equilibrium::z_residual(p, dom, p.theta_gamma, z).abs();
    Ok(CheckOutcome::new(
        "equilibrium_unique",
        crossings == 1 && residual <= 1e-12,
        format!("Z = {z:.12e}, |residual| = {residual:.1e}, sign changes = {crossings}"),
    ))
}

fn check_sweep_monotone(p: &MaterialParams, dom: &ColumnDomain) -> Result<CheckOutcome> {
    let th = equilibrium::thresholds(p, dom);
    let span = (th.theta_liquid - th.theta_solid).max(1e-6 * p.theta_c);
    let (lo, hi) = ((th.theta_solid - span).max(1e-3 * p.theta_c), th.theta_liquid + span);
    let n = 200;
    let mut prev: Option<equilibrium::EquilibriumSolution> = None;
    let mut ok = true;
    for i in 0..n {
        let tg = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let sol = equilibrium::solve(p, dom, tg)?;
        if let Some(q) = &prev {
            ok &= sol.z >= q.z
                && sol.solid_fraction <= q.solid_fraction + 1e-15
                && sol.case_tag.rank() >= q.case_tag.rank();
        }
        prev = Some(sol);
    }
    Ok(CheckOutcome::new(
        "equilibrium_sweep_monotone",
        ok,
        format!("{n} temperatures in [{lo:.6e}, {hi:.6e}]"),
    ))
}

fn check_fixed_point(
    p: &MaterialParams,
    dom: &ColumnDomain,
    stepper: &StepperConfig,
) -> Result<CheckOutcome> {
    let eq = equilibrium::discrete_equilibrium(p, dom, p.theta_gamma)?;
    let s = StateField {
        theta: vec![p.theta_gamma; dom.n_cells],
        u: eq.u_inf.clone(),
        chi: eq.chi_inf.clone(),
        t: 0.0,
    };
    let (next, _) = step_coupled(&s, stepper.dt, p, dom, stepper)?;
    let change = (0..dom.n_cells)
        .map(|i| {
            ((next.theta[i] - s.theta[i]) / p.theta_gamma)
                .abs()
                .max((next.chi[i] - s.chi[i]).abs())
                .max((next.u[i] - s.u[i]).abs() / p.alpha.max(f64::MIN_POSITIVE))
        })
        .fold(0.0, f64::max);
    Ok(CheckOutcome::new(
        "equilibrium_fixed_point",
        change <= 1e-12,
        format!("max relative change after one step = {change:.1e}"),
    ))
}

fn check_source_identity(
    state: &StateField,
    p: &MaterialParams,
    dom: &ColumnDomain,
    dt: f64,
) -> CheckOutcome {
    let (direct, rewritten) = source_identity_forms(state, dt, p, dom);
    let scale = direct
        .iter()
        .chain(&rewritten)
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let gap = direct
        .iter()
        .zip(&rewritten)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;
    CheckOutcome::new(
        "heat_source_identity",
        gap <= 1e-10,
        format!("max relative gap = {gap:.1e}"),
    )
}

fn check_run(state0: &StateField, cfg: &RunConfig, dom: &ColumnDomain) -> Result<Vec<CheckOutcome>> {
    let p = &cfg.params;
    let mut rec = Recorder::new(state0, p, dom, None);
    let mut chi_ok = true;
    let mut theta_ok = true;
    let mut mean_u_rel = 0.0f64;
    let outcome = run(state0, &cfg.stepper, p, dom, |e| {
        chi_ok &= e.after.chi.iter().all(|&c| (0.0..=1.0).contains(&c));
        theta_ok &= e.after.theta.iter().all(|&t| t > 0.0);
        let max_u = e.after.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max_u > 0.0 {
            mean_u_rel = mean_u_rel.max(dom.mean(&e.after.u).abs() / max_u);
        }
        rec.observe(e);
    })?;
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    let records = rec.records;
    let min_production = entropy_production_series(&records)
        .iter()
        .map(|e| e.production)
        .fold(f64::INFINITY, f64::min);
    let lyap = lyapunov_series(&records, p.theta_gamma, 2.0);
    let t_end = cfg.stepper.t_end;
    Ok(vec![
        CheckOutcome::new(
            "phase_bounds",
            chi_ok,
            format!("chi in [0, 1] over {} steps", outcome.steps_taken),
        ),
        CheckOutcome::new("temperature_positive", theta_ok, format!("up to t = {t_end}")),
        CheckOutcome::new(
            "zero_mean_volume_increment",
            mean_u_rel <= 1e-12,
            format!("max |mean U| / max |U| = {mean_u_rel:.1e}"),
        ),
        CheckOutcome::new(
            "entropy_production_nonnegative",
            records.len() < 2 || min_production >= 0.0,
            format!("min production = {min_production:.3e}"),
        ),
        CheckOutcome::new(
            "lyapunov_nonincreasing",
            lyap.violations.is_empty(),
            format!(
                "largest step increase = {:.3e}, violations = {}",
                lyap.max_increase,
                lyap.violations.len()
            ),
        ),
    ])
}

fn check_picard(
    state0: &StateField,
    p: &MaterialParams,
    dom: &ColumnDomain,
    stepper: &StepperConfig,
) -> Result<CheckOutcome> {
    let horizon = stepper.t_end.min(100.0 * stepper.dt).max(stepper.dt);
    let picard_cfg = StepperConfig {
        scheme: Scheme::Picard,
        r_cutoff: stepper.r_cutoff,
        picard_tol: 1e-12 * p.theta_gamma,
        picard_max_iter: stepper.picard_max_iter.max(100),
        ..stepper.clone()
    };
    let sol = picard_solve(state0, horizon, stepper.dt, p, dom, &picard_cfg)?;
    let coupled = StepperConfig {
        t_end: horizon,
        scheme: Scheme::CoupledSemiImplicit,
        sample_stride: 1,
        ..stepper.clone()
    };
    let mut dist_sq = 0.0;
    let mut k = 0;
    let outcome = run(state0, &coupled, p, dom, |e| {
        let ps = &sol.states[k];
        dist_sq += e.report.dt * dom.integrate_with(|i| (e.after.theta[i] - ps.theta[i]).powi(2));
        k += 1;
    })?;
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    let dist = dist_sq.sqrt();
    let contracting = sol.factors.iter().all(|&f| f < 1.0);
    let tol = 1e-6 * p.theta_gamma;
    Ok(CheckOutcome::new(
        "picard_matches_coupled",
        dist <= tol && contracting,
        format!(
            "L2 distance = {dist:.1e} over t <= {horizon}, {} iterations, saturated = {}",
            sol.iterations, sol.saturated
        ),
    ))
}

fn check_energy_order(
    state0: &StateField,
    p: &MaterialParams,
    dom: &ColumnDomain,
    stepper: &StepperConfig,
) -> Result<CheckOutcome> {
    let horizon = stepper.t_end.min(200.0 * stepper.dt).max(2.0 * stepper.dt);
    // Returns the integrated residual and the cancellation floor of the
    // totals it is computed from.
    let residual = |dt: f64| -> Result<(f64, f64)> {
        let cfg = StepperConfig {
            dt,
            t_end: horizon,
            scheme: Scheme::CoupledSemiImplicit,
            ..stepper.clone()
        };
        let mut rec = Recorder::new(state0, p, dom, None);
        let out = run(state0, &cfg, p, dom, |e| rec.observe(e))?;
        if let Some(e) = out.failure {
            return Err(e);
        }
        let energy = rec
            .records
            .iter()
            .map(|r| r.total_energy_ext.abs())
            .fold(0.0, f64::max);
        let floor = 8.0 * f64::EPSILON * energy * out.steps_taken as f64;
        Ok((integrated_energy_residual(&rec.records), floor))
    };
    let (coarse, _) = residual(stepper.dt)?;
    let (fine, floor) = residual(stepper.dt / 2.0)?;
    let (passed, detail) = if fine <= floor {
        (
            true,
            format!("residual {fine:.1e} below the cancellation floor {floor:.1e}"),
        )
    } else {
        let order = (coarse / fine).log2();
        (order >= 0.8, format!("observed order {order:.2} ({coarse:.2e} -> {fine:.2e})"))
    };
    Ok(CheckOutcome::new("energy_balance_order", passed, detail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli_io::config::parse_config;

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_sweep("0.9:0.9:1").unwrap(), vec![0.9]);
        assert!(parse_sweep("1:2").is_err());
        assert!(parse_sweep("2:1:3").is_err());
        assert!(parse_sweep("0:1:3").is_err());
    }

    #[test]
    fn exit_codes_split_config_and_numerics() {
        assert_eq!(exit_code(&Error::UnknownPreset("x".into())), 1);
        assert_eq!(exit_code(&Error::invalid("dt", "bad")), 1);
        assert_eq!(
            exit_code(&Error::PositivityLoss {
                t: 1.0,
                cell: 0,
                value: -1.0
            }),
            2
        );
    }

    #[test]
    fn verify_passes_on_short_normalized_run() {
        let cfg = parse_config(
            "preset = normalized\n[domain]\nn_cells = 16\n[stepper]\ndt = 1e-2, t_end = 0.5\n[initial]\nchi0 = 0.5\n",
        )
        .unwrap();
        let checks = cmd_verify(&cfg).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{}", format_checks(&checks));
    }

    #[test]
    fn zero_gravity_equilibrium_rows() {
        let cfg = parse_config("[material]\ng = 0\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let temps = parse_sweep("0.5:1.5:5").unwrap();
        let path = cmd_equilibrium(&cfg, Some(&temps), true, dir.path()).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains("degenerate"));
        assert_eq!(
            cmd_equilibrium(&cfg, None, false, dir.path()).unwrap_err(),
            Error::ZeroGravity
        );
    }
}
