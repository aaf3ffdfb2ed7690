//! Stationary states.
//!
//! At rest the temperature equals `theta_gamma` and the phase inclusion
//! reduces to a single scalar equation `Z = K + F(Z)` for the parameter
//! `Z`, where `K = (theta_gamma / theta_c - 1) / d` and `F(Z)` is the volume
//! fraction above the interface height `m + G0 ell Z`. `F` is nonincreasing,
//! so the residual `Z - K - F(Z)` is strictly increasing and has exactly one
//! root whenever gravity is present.

use crate::error::{Error, Result};
use crate::model::{derive_dimensionless, ColumnDomain, DimensionlessGroups, MaterialParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseCase {
    PureSolid,
    PureLiquid,
    Interface,
}

impl PhaseCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseCase::PureSolid => "pure_solid",
            PhaseCase::PureLiquid => "pure_liquid",
            PhaseCase::Interface => "interface",
        }
    }

    /// Ordering along increasing boundary temperature.
    pub fn rank(&self) -> u8 {
        match self {
            PhaseCase::PureSolid => 0,
            PhaseCase::Interface => 1,
            PhaseCase::PureLiquid => 2,
        }
    }
}

/// Bounds of the interface regime in `Z` and in boundary temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseThresholds {
    /// `(a - m) / (G0 ell)`.
    pub z_solid: f64,
    /// `(b - m) / (G0 ell)`.
    pub z_liquid: f64,
    /// Highest temperature that still yields pure solid.
    pub theta_solid: f64,
    /// Lowest temperature that yields pure liquid.
    pub theta_liquid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub theta_gamma: f64,
    pub z: f64,
    pub case_tag: PhaseCase,
    /// `m + G0 ell Z`.
    pub interface_height: f64,
    pub chi_inf: Vec<f64>,
    pub u_inf: Vec<f64>,
    pub p_inf: Vec<f64>,
    /// Volume fraction of solid, `F(Z)`.
    pub solid_fraction: f64,
}

/// `K = (theta_gamma / theta_c - 1) / d`.
pub fn temperature_offset(p: &MaterialParams, groups: &DimensionlessGroups, theta_gamma: f64) -> f64 {
    (theta_gamma / p.theta_c - 1.0) / groups.d
}

/// `Z - K - F(Z)`.
pub fn z_residual(p: &MaterialParams, dom: &ColumnDomain, theta_gamma: f64, z: f64) -> f64 {
    let groups = derive_dimensionless(p, dom);
    let k = temperature_offset(p, &groups, theta_gamma);
    let scale = groups.interface_scale(dom);
    z - k - dom.solid_fraction_above(dom.m + scale * z)
}

/// Index of the linear piece of `F` containing height `r`: `None` below
/// `a` or above `b` is encoded as `-1` and `n`.
fn piece_of(dom: &ColumnDomain, r: f64) -> i64 {
    if r <= dom.a {
        -1
    } else if r >= dom.b {
        dom.n_cells as i64
    } else {
        (((r - dom.a) / dom.dz).floor() as i64).clamp(0, dom.n_cells as i64 - 1)
    }
}

/// Unique root of `Z = K + F(Z)`.
///
/// Bisection on `[K, K + 1]` narrows the bracket until it sits inside one
/// linear piece of `F`; the root is then solved for in closed form, so the
/// residual is at roundoff level rather than at the bisection tolerance.
pub fn solve_z(p: &MaterialParams, dom: &ColumnDomain, theta_gamma: f64) -> Result<f64> {
    p.validate()?;
    let groups = derive_dimensionless(p, dom);
    if groups.is_zero_gravity() {
        return Err(Error::ZeroGravity);
    }
    let k = temperature_offset(p, &groups, theta_gamma);
    let scale = groups.interface_scale(dom);
    let height = |z: f64| dom.m + scale * z;
    let residual = |z: f64| z - k - dom.solid_fraction_above(height(z));

    let (mut lo, mut hi) = (k, k + 1.0);
    if residual(lo) >= 0.0 {
        return Ok(lo);
    }
    if residual(hi) <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        if piece_of(dom, height(lo)) == piece_of(dom, height(hi)) {
            break;
        }
        if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Closed-form root of each linear piece touched by the bracket, plus the
    // faces in between; keep the candidate with the smallest residual.
    let piece_root = |piece: i64| -> f64 {
        if piece < 0 {
            k + 1.0
        } else if piece >= dom.n_cells as i64 {
            k
        } else {
            let j = piece as usize;
            let above: f64 = ((j + 1)..dom.n_cells).map(|i| dom.cell_volume(i)).sum();
            let top = dom.face_below(j + 1);
            let slope = dom.area[j] * scale / dom.volume_total;
            (k + (above + dom.area[j] * (top - dom.m)) / dom.volume_total) / (1.0 + slope)
        }
    };
    let (p_lo, p_hi) = (piece_of(dom, height(lo)), piece_of(dom, height(hi)));
    let mut candidates = vec![piece_root(p_lo), piece_root(p_hi), 0.5 * (lo + hi)];
    for face in (p_lo + 1).max(0)..=p_hi.min(dom.n_cells as i64) {
        candidates.push((dom.face_below(face as usize) - dom.m) / scale);
    }
    let z = candidates
        .into_iter()
        .map(|z| z.clamp(lo, hi))
        .min_by(|x, y| residual(*x).abs().total_cmp(&residual(*y).abs()))
        .unwrap_or(0.5 * (lo + hi));
    Ok(z)
}

pub fn thresholds(p: &MaterialParams, dom: &ColumnDomain) -> CaseThresholds {
    let groups = derive_dimensionless(p, dom);
    let scale = groups.interface_scale(dom);
    let z_solid = (dom.a - dom.m) / scale;
    let z_liquid = (dom.b - dom.m) / scale;
    CaseThresholds {
        z_solid,
        z_liquid,
        theta_solid: p.theta_c * (1.0 - groups.d * (1.0 + (dom.m - dom.a) / scale)),
        theta_liquid: p.theta_c * (1.0 + groups.d * (dom.b - dom.m) / scale),
    }
}

/// Regime of the equilibrium with parameter `z`. Ties at a threshold go to
/// the pure phase.
pub fn classify(p: &MaterialParams, dom: &ColumnDomain, z: f64) -> (PhaseCase, CaseThresholds) {
    let th = thresholds(p, dom);
    let case = if z <= th.z_solid {
        PhaseCase::PureSolid
    } else if z >= th.z_liquid {
        PhaseCase::PureLiquid
    } else {
        PhaseCase::Interface
    };
    (case, th)
}

/// Displacement and pressure fields that go with a given phase field at rest.
fn mechanical_fields(
    p: &MaterialParams,
    dom: &ColumnDomain,
    theta_gamma: f64,
    chi: &[f64],
) -> (Vec<f64>, Vec<f64>, f64) {
    let solid = dom.integrate_with(|i| 1.0 - chi[i]) / dom.volume_total;
    let u = (0..dom.n_cells)
        .map(|i| {
            p.alpha * (1.0 - chi[i]) - p.alpha * solid
                + p.rho0 * p.g / p.lambda * (dom.z_centers[i] - dom.m)
        })
        .collect();
    let pr = (0..dom.n_cells)
        .map(|i| equilibrium_pressure_at(p, dom, theta_gamma, solid, dom.z_centers[i]))
        .collect();
    (u, pr, solid)
}

/// Relative pressure at rest at height `x3`.
pub fn equilibrium_pressure_at(
    p: &MaterialParams,
    dom: &ColumnDomain,
    theta_gamma: f64,
    solid_fraction: f64,
    x3: f64,
) -> f64 {
    p.alpha * p.lambda * solid_fraction + p.beta * (theta_gamma - p.theta_c)
        + p.rho0 * p.g * dom.m
        - p.rho0 * p.g * x3
}

/// Sharp-interface fields: liquid below `m + G0 ell Z`, solid above. The
/// cell cut by the interface gets its liquid volume fraction, so the solid
/// volume equals `|Omega| F(Z)` exactly.
pub fn equilibrium_fields(
    p: &MaterialParams,
    dom: &ColumnDomain,
    theta_gamma: f64,
    z: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let groups = derive_dimensionless(p, dom);
    let r = dom.m + groups.interface_scale(dom) * z;
    let chi: Vec<f64> = (0..dom.n_cells)
        .map(|i| 1.0 - dom.volume_above_in_cell(i, r) / dom.cell_volume(i))
        .collect();
    let (u, pr, _) = mechanical_fields(p, dom, theta_gamma, &chi);
    (chi, u, pr)
}

/// Solve, classify and build the fields in one call.
pub fn solve(p: &MaterialParams, dom: &ColumnDomain, theta_gamma: f64) -> Result<EquilibriumSolution> {
    let z = solve_z(p, dom, theta_gamma)?;
    let (case_tag, _) = classify(p, dom, z);
    let groups = derive_dimensionless(p, dom);
    let (chi_inf, u_inf, p_inf) = equilibrium_fields(p, dom, theta_gamma, z);
    Ok(EquilibriumSolution {
        theta_gamma,
        z,
        case_tag,
        interface_height: dom.m + groups.interface_scale(dom) * z,
        solid_fraction: dom.solid_fraction_above(dom.m + groups.interface_scale(dom) * z),
        chi_inf,
        u_inf,
        p_inf,
    })
}

/// Rest state of the cell-centred discretization used by the time stepper.
///
/// There every cell sees the gravity potential at its center, so a cell is
/// liquid when its center lies below the interface and solid when above; a
/// cell can only stay mixed when the interface passes exactly through its
/// center. The solid fraction is then a staircase in the interface height
/// and the scalar equation becomes `Z - K ∈ F_h(Z)`, which again has a
/// unique solution. This is the state that long runs of the stepper reach;
/// it differs from [`solve`] by at most one cell.
pub fn discrete_equilibrium(
    p: &MaterialParams,
    dom: &ColumnDomain,
    theta_gamma: f64,
) -> Result<EquilibriumSolution> {
    p.validate()?;
    let groups = derive_dimensionless(p, dom);
    if groups.is_zero_gravity() {
        return Err(Error::ZeroGravity);
    }
    let k = temperature_offset(p, &groups, theta_gamma);
    let scale = groups.interface_scale(dom);
    let n = dom.n_cells;
    let vol = dom.volume_total;

    // suffix[j]: volume of cells j..n
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + dom.cell_volume(j);
    }

    let mut chi = vec![1.0; n];
    let mut interface = None;
    // Candidate r between centers j-1 and j, with cells j.. solid.
    for j in 0..=n {
        let r = dom.m + scale * (k + suffix[j] / vol);
        let above_prev = j == 0 || r > dom.z_centers[j - 1];
        let below_next = j == n || r < dom.z_centers[j];
        if above_prev && below_next {
            for c in chi.iter_mut().skip(j) {
                *c = 0.0;
            }
            interface = Some(r);
            break;
        }
        if j < n {
            // Mixed cell j with the interface on its center.
            let required = ((dom.z_centers[j] - dom.m) / scale - k) * vol;
            if required >= suffix[j + 1] && required <= suffix[j] {
                for c in chi.iter_mut().skip(j + 1) {
                    *c = 0.0;
                }
                let solid_here = (required - suffix[j + 1]) / dom.cell_volume(j);
                chi[j] = (1.0 - solid_here).clamp(0.0, 1.0);
                interface = Some(dom.z_centers[j]);
                break;
            }
        }
    }
    let interface_height = match interface {
        Some(r) => r,
        // Only reachable through rounding at a boundary between candidates;
        // fall back to the closest sharp profile.
        None => {
            let z = solve_z(p, dom, theta_gamma)?;
            let r = dom.m + scale * z;
            for (c, zc) in chi.iter_mut().zip(&dom.z_centers) {
                *c = if *zc < r { 1.0 } else { 0.0 };
            }
            r
        }
    };
    let (u_inf, p_inf, solid_fraction) = mechanical_fields(p, dom, theta_gamma, &chi);
    let case_tag = if chi.iter().all(|&c| c == 0.0) {
        PhaseCase::PureSolid
    } else if chi.iter().all(|&c| c == 1.0) {
        PhaseCase::PureLiquid
    } else {
        PhaseCase::Interface
    };
    Ok(EquilibriumSolution {
        theta_gamma,
        z: (interface_height - dom.m) / scale,
        case_tag,
        interface_height,
        chi_inf: chi,
        u_inf,
        p_inf,
        solid_fraction,
    })
}

/// Residual of the Clausius-Clapeyron relation at the interface in product form,
/// `(p_inf(x3*) alpha theta_c + rho0 L_beta (theta_gamma - theta_c)) / (rho0 L_beta theta_c)`.
pub fn clausius_clapeyron_residual(
    p: &MaterialParams,
    dom: &ColumnDomain,
    sol: &EquilibriumSolution,
) -> Result<f64> {
    if sol.case_tag != PhaseCase::Interface {
        return Err(Error::NotInterface);
    }
    let l_beta = p.latent_heat_beta();
    let p_star = equilibrium_pressure_at(
        p,
        dom,
        sol.theta_gamma,
        sol.solid_fraction,
        sol.interface_height,
    );
    Ok((p_star * p.alpha * p.theta_c + l_beta * (sol.theta_gamma - p.theta_c))
        / (l_beta.abs() * p.theta_c))
}

/// `p_inf(x3*) / (theta_gamma - theta_c)`, undefined at `theta_gamma = theta_c`.
/// At an exact interface it equals `-rho0 L_beta / (alpha theta_c)`.
pub fn clausius_clapeyron_ratio(
    p: &MaterialParams,
    dom: &ColumnDomain,
    sol: &EquilibriumSolution,
) -> Option<f64> {
    if sol.case_tag != PhaseCase::Interface || sol.theta_gamma == p.theta_c {
        return None;
    }
    let p_star = equilibrium_pressure_at(
        p,
        dom,
        sol.theta_gamma,
        sol.solid_fraction,
        sol.interface_height,
    );
    Some(p_star / (sol.theta_gamma - p.theta_c))
}

/// Admissible phase distributions without gravity.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroGravityEquilibria {
    UniquePureLiquid,
    UniquePureSolid,
    /// Every phase field with this mean solid fraction is an equilibrium.
    Degenerate {
        mean_solid_fraction: f64,
        /// Two distinct admissible `(chi, u)` pairs: liquid stacked below
        /// solid, and cells alternating between the phases.
        witnesses: [(Vec<f64>, Vec<f64>); 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroGravitySet {
    /// Closed temperature interval `[theta_c (1 - d), theta_c]` in which the
    /// mean-solid-fraction condition admits mixed states.
    pub interval: (f64, f64),
    pub equilibria: ZeroGravityEquilibria,
}

/// Fills cells in `order` with liquid until the liquid volume is reached.
fn fill_liquid(dom: &ColumnDomain, order: &[usize], liquid_volume: f64) -> Vec<f64> {
    let mut chi = vec![0.0; dom.n_cells];
    let mut left = liquid_volume;
    for &i in order {
        let v = dom.cell_volume(i);
        if left <= 0.0 {
            break;
        }
        if left >= v {
            chi[i] = 1.0;
            left -= v;
        } else {
            chi[i] = left / v;
            left = 0.0;
        }
    }
    chi
}

pub fn zero_gravity_equilibrium_set(
    p: &MaterialParams,
    dom: &ColumnDomain,
    theta_gamma: f64,
) -> Result<ZeroGravitySet> {
    if p.g != 0.0 {
        return Err(Error::GravityPresent(p.g));
    }
    p.validate()?;
    let groups = derive_dimensionless(p, dom);
    let k = temperature_offset(p, &groups, theta_gamma);
    let interval = (p.theta_c * (1.0 - groups.d), p.theta_c);
    let equilibria = if k >= 0.0 {
        ZeroGravityEquilibria::UniquePureLiquid
    } else if k <= -1.0 {
        ZeroGravityEquilibria::UniquePureSolid
    } else {
        let mean_solid_fraction = -k;
        let liquid = (1.0 - mean_solid_fraction) * dom.volume_total;
        let layered_order: Vec<usize> = (0..dom.n_cells).collect();
        let interleaved_order: Vec<usize> = (0..dom.n_cells)
            .step_by(2)
            .chain((1..dom.n_cells).step_by(2))
            .collect();
        let witness = |order: &[usize]| {
            let chi = fill_liquid(dom, order, liquid);
            let solid = dom.integrate_with(|i| 1.0 - chi[i]) / dom.volume_total;
            let u = chi.iter().map(|c| p.alpha * (1.0 - c) - p.alpha * solid).collect();
            (chi, u)
        };
        ZeroGravityEquilibria::Degenerate {
            mean_solid_fraction,
            witnesses: [witness(&layered_order), witness(&interleaved_order)],
        }
    };
    Ok(ZeroGravitySet {
        interval,
        equilibria,
    })
}
