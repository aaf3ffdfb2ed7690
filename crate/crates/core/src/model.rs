//! Material constants, column geometry and the state container.
//!
//! The container is represented as a vertical column `[a, b]` cut into
//! horizontal slabs of equal thickness. Each slab carries its own
//! cross-section area and lateral perimeter, which is all the dynamics and
//! the equilibrium theory need from the three-dimensional shape: every
//! coupling depends on position only through the height `x3` and through
//! volume averages.

use crate::error::{Error, Result};

/// Physical constants of the medium together with the thermal boundary data.
///
/// All energy-like constants are volumetric (`c = rho0 * c0`, `L = rho0 * L0`,
/// `gamma = rho0 * gamma0`).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    /// Volumetric heat capacity [J m^-3 K^-1].
    pub c: f64,
    /// Heat conductivity [W m^-1 K^-1].
    pub kappa: f64,
    /// Bulk modulus [Pa].
    pub lambda: f64,
    /// Volume viscosity [Pa s].
    pub nu: f64,
    /// Relative excess of the solid specific volume over the liquid one.
    pub alpha: f64,
    /// Thermal expansion coefficient [Pa K^-1].
    pub beta: f64,
    /// Phase relaxation coefficient [Pa s].
    pub gamma: f64,
    /// Volumetric latent heat [J m^-3].
    pub latent_heat: f64,
    /// Mass density [kg m^-3].
    pub rho0: f64,
    /// Gravity [m s^-2].
    pub g: f64,
    /// Freezing point at standard pressure [K].
    pub theta_c: f64,
    /// External temperature [K].
    pub theta_gamma: f64,
    /// Heat transfer coefficient at the bottom face [W m^-2 K^-1].
    pub h_bottom: f64,
    /// Heat transfer coefficient at the top face [W m^-2 K^-1].
    pub h_top: f64,
    /// Heat transfer coefficient on the lateral wall [W m^-2 K^-1].
    pub h_lateral: f64,
}

impl MaterialParams {
    /// Unit constants with `L = 2`, the scaling used for the well-posedness
    /// analysis. Boundary exchange defaults to `h = 1` at both ends.
    pub fn normalized() -> Self {
        MaterialParams {
            c: 1.0,
            kappa: 1.0,
            lambda: 1.0,
            nu: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            latent_heat: 2.0,
            rho0: 1.0,
            g: 1.0,
            theta_c: 1.0,
            theta_gamma: 1.0,
            h_bottom: 1.0,
            h_top: 1.0,
            h_lateral: 0.0,
        }
    }

    /// Handbook constants for water and ice near 0 °C.
    ///
    /// `beta`, `nu` and `gamma` are not tabulated quantities for this model:
    /// `beta` is the bulk modulus times a volumetric expansion of
    /// 2.1e-4 K^-1, `nu` and `gamma` are chosen so that the volume and phase
    /// relaxation times `nu / lambda` and `gamma / (alpha^2 lambda)` are about
    /// one second.
    pub fn water() -> Self {
        let rho0 = 1000.0;
        let sound_speed = 1482.0;
        let lambda = rho0 * sound_speed * sound_speed;
        let alpha = 0.09;
        MaterialParams {
            c: rho0 * 4180.0,
            kappa: 0.6,
            lambda,
            nu: lambda,
            alpha,
            beta: 2.1e-4 * lambda,
            gamma: alpha * alpha * lambda,
            latent_heat: rho0 * 3.34e5,
            rho0,
            g: 9.81,
            theta_c: 273.15,
            theta_gamma: 273.15,
            h_bottom: 10.0,
            h_top: 10.0,
            h_lateral: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("c", self.c),
            ("kappa", self.kappa),
            ("lambda", self.lambda),
            ("nu", self.nu),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("L", self.latent_heat),
            ("rho0", self.rho0),
            ("theta_c", self.theta_c),
            ("theta_gamma", self.theta_gamma),
        ];
        for (name, value) in strictly_positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        let nonnegative = [
            ("beta", self.beta),
            ("g", self.g),
            ("h_bottom", self.h_bottom),
            ("h_top", self.h_top),
            ("h_lateral", self.h_lateral),
        ];
        for (name, value) in nonnegative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and nonnegative, got {value}"),
                ));
            }
        }
        Ok(())
    }

    /// True when every model constant matches [`MaterialParams::normalized`];
    /// the boundary data `theta_gamma` and `h_*` are free.
    pub fn is_normalized(&self) -> bool {
        let n = Self::normalized();
        [
            (self.c, n.c),
            (self.kappa, n.kappa),
            (self.lambda, n.lambda),
            (self.nu, n.nu),
            (self.alpha, n.alpha),
            (self.beta, n.beta),
            (self.gamma, n.gamma),
            (self.latent_heat, n.latent_heat),
            (self.rho0, n.rho0),
            (self.g, n.g),
            (self.theta_c, n.theta_c),
        ]
        .iter()
        .all(|(a, b)| a == b)
    }

    /// Latent heat corrected for thermal stress, `rho0 * L_beta = L - alpha beta theta_c`.
    pub fn latent_heat_beta(&self) -> f64 {
        self.latent_heat - self.alpha * self.beta * self.theta_c
    }
}

/// Piecewise-constant profile over height, used for cross-section areas and
/// perimeters.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `(upper_height, value)` pairs in increasing height order: `value`
    /// applies below `upper_height`; the last value extends upwards.
    Steps(Vec<(f64, f64)>),
}

impl Profile {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Steps(steps) => steps
                .iter()
                .find(|(upper, _)| z < *upper)
                .or_else(|| steps.last())
                .map(|(_, v)| *v)
                .unwrap_or(0.0),
        }
    }
}

/// Geometry inputs from which a [`ColumnDomain`] is built.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
    pub area: Profile,
    pub perimeter: Profile,
}

impl DomainSpec {
    pub fn build(&self) -> Result<ColumnDomain> {
        ColumnDomain::build(
            self.a,
            self.b,
            self.n_cells,
            |z| self.area.eval(z),
            |z| self.perimeter.eval(z),
        )
    }
}

/// Discretized vertical container.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDomain {
    pub a: f64,
    pub b: f64,
    pub n_cells: usize,
    pub z_centers: Vec<f64>,
    pub dz: f64,
    pub area: Vec<f64>,
    pub perimeter: Vec<f64>,
    /// `|Omega|`, the sum of cell volumes.
    pub volume_total: f64,
    /// Volume-averaged height (the midsurface).
    pub m: f64,
    /// `b - a`.
    pub ell: f64,
}

impl ColumnDomain {
    /// Uniform grid of `n_cells` slabs; area and perimeter are sampled at the
    /// cell centers.
    pub fn build(
        a: f64,
        b: f64,
        n_cells: usize,
        area_profile: impl Fn(f64) -> f64,
        perimeter_profile: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::invalid("b", format!("need b > a, got a = {a}, b = {b}")));
        }
        if n_cells < 2 {
            return Err(Error::invalid(
                "n_cells",
                format!("need at least 2 cells, got {n_cells}"),
            ));
        }
        let ell = b - a;
        let dz = ell / n_cells as f64;
        let z_centers: Vec<f64> = (0..n_cells).map(|i| a + (i as f64 + 0.5) * dz).collect();
        let mut area = Vec::with_capacity(n_cells);
        let mut perimeter = Vec::with_capacity(n_cells);
        for &z in &z_centers {
            let s = area_profile(z);
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Disconnected { height: z, area: s });
            }
            area.push(s);
            let per = perimeter_profile(z);
            if !(per.is_finite() && per >= 0.0) {
                return Err(Error::invalid(
                    "perimeter",
                    format!("must be nonnegative, got {per} at height {z}"),
                ));
            }
            perimeter.push(per);
        }
        let volume_total: f64 = area.iter().map(|s| s * dz).sum();
        let first_moment: f64 = area
            .iter()
            .zip(&z_centers)
            .map(|(s, z)| s * z * dz)
            .sum();
        let m = first_moment / volume_total;
        Ok(ColumnDomain {
            a,
            b,
            n_cells,
            z_centers,
            dz,
            area,
            perimeter,
            volume_total,
            m,
            ell,
        })
    }

    /// Uniform column of unit cross-section without lateral wall exchange.
    pub fn uniform(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        Self::build(a, b, n_cells, |_| 1.0, |_| 0.0)
    }

    #[inline]
    pub fn cell_volume(&self, i: usize) -> f64 {
        self.area[i] * self.dz
    }

    /// Lower face of cell `i`.
    #[inline]
    pub fn face_below(&self, i: usize) -> f64 {
        self.a + i as f64 * self.dz
    }

    /// Area of the interface between cells `i` and `i + 1`.
    #[inline]
    pub fn face_area(&self, i: usize) -> f64 {
        0.5 * (self.area[i] + self.area[i + 1])
    }

    /// Volume integral of a cell field.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        debug_assert_eq!(field.len(), self.n_cells);
        field
            .iter()
            .zip(&self.area)
            .map(|(f, s)| f * s * self.dz)
            .sum()
    }

    /// Volume average of a cell field.
    pub fn mean(&self, field: &[f64]) -> f64 {
        self.integrate(field) / self.volume_total
    }

    pub fn integrate_with(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.n_cells).map(|i| f(i) * self.area[i] * self.dz).sum()
    }

    pub fn check_len(&self, field: &'static str, values: &[f64]) -> Result<()> {
        if values.len() != self.n_cells {
            return Err(Error::ShapeMismatch {
                field,
                expected: self.n_cells,
                found: values.len(),
            });
        }
        Ok(())
    }

    /// Volume of `{x3 > r}` inside each cell, exact for the slab geometry.
    pub fn volume_above_in_cell(&self, i: usize, r: f64) -> f64 {
        let lo = self.face_below(i);
        let hi = self.face_below(i + 1);
        let height = if r <= lo {
            self.dz
        } else if r >= hi {
            0.0
        } else {
            hi - r
        };
        self.area[i] * height
    }

    /// `|Omega(r)| / |Omega|` with `Omega(r) = {x3 > r}`.
    ///
    /// Partial slabs are integrated exactly, so the result is continuous and
    /// piecewise linear in `r`, equal to 1 for `r <= a` and 0 for `r >= b`.
    pub fn solid_fraction_above(&self, r: f64) -> f64 {
        if r <= self.a {
            return 1.0;
        }
        if r >= self.b {
            return 0.0;
        }
        let above: f64 = (0..self.n_cells)
            .map(|i| self.volume_above_in_cell(i, r))
            .sum();
        (above / self.volume_total).clamp(0.0, 1.0)
    }
}

/// Dimensionless ratios of latent heat, elastic energy and gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessGroups {
    /// `alpha^2 lambda / L`.
    pub d: f64,
    /// `alpha lambda / (rho0 g ell)`; infinite without gravity.
    pub g0: f64,
}

impl DimensionlessGroups {
    pub fn is_zero_gravity(&self) -> bool {
        self.g0.is_infinite()
    }

    /// `G0 * ell`, the height scale that converts the equilibrium parameter
    /// `Z` into an interface offset from the midsurface.
    pub fn interface_scale(&self, dom: &ColumnDomain) -> f64 {
        self.g0 * dom.ell
    }
}

pub fn derive_dimensionless(p: &MaterialParams, dom: &ColumnDomain) -> DimensionlessGroups {
    let d = p.alpha * p.alpha * p.lambda / p.latent_heat;
    let g0 = if p.g == 0.0 {
        f64::INFINITY
    } else {
        p.alpha * p.lambda / (p.rho0 * p.g * dom.ell)
    };
    DimensionlessGroups { d, g0 }
}

/// Named parameter set and its default container.
pub fn preset(name: &str) -> Result<(MaterialParams, DomainSpec)> {
    match name {
        "normalized" => Ok((
            MaterialParams::normalized(),
            DomainSpec {
                a: 0.0,
                b: 1.0,
                n_cells: 64,
                area: Profile::Constant(1.0),
                perimeter: Profile::Constant(0.0),
            },
        )),
        "water" => Ok((
            MaterialParams::water(),
            // 50 cm bottle with a 10 cm x 10 cm square cross-section.
            DomainSpec {
                a: 0.0,
                b: 0.5,
                n_cells: 64,
                area: Profile::Constant(0.01),
                perimeter: Profile::Constant(0.4),
            },
        )),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Full dynamical state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    /// Absolute temperature per cell [K].
    pub theta: Vec<f64>,
    /// Relative volume increment `div u` per cell.
    pub u: Vec<f64>,
    /// Liquid fraction per cell.
    pub chi: Vec<f64>,
    pub t: f64,
}

impl StateField {
    pub fn uniform(dom: &ColumnDomain, theta: f64, u: f64, chi: f64) -> Self {
        let n = dom.n_cells;
        StateField {
            theta: vec![theta; n],
            u: vec![u; n],
            chi: vec![chi; n],
            t: 0.0,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.theta.len()
    }

    /// Removes the volume mean of `u` and returns the mean that was removed.
    pub fn project_zero_mean_u(&mut self, dom: &ColumnDomain) -> f64 {
        let mut removed = 0.0;
        // second pass clears the roundoff left by the first
        for _ in 0..2 {
            let mean = dom.mean(&self.u);
            for u in &mut self.u {
                *u -= mean;
            }
            removed += mean;
        }
        removed
    }

    /// Checks shape, positivity of `theta`, `chi` in `[0, 1]` and the
    /// zero-mean condition on `u`.
    pub fn validate(&self, dom: &ColumnDomain) -> Result<()> {
        dom.check_len("theta", &self.theta)?;
        dom.check_len("u", &self.u)?;
        dom.check_len("chi", &self.chi)?;
        if let Some((cell, &value)) = self
            .theta
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > 0.0))
        {
            return Err(Error::PositivityLoss {
                t: self.t,
                cell,
                value,
            });
        }
        if let Some((cell, &value)) = self
            .chi
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::PhaseOutOfRange { cell, value });
        }
        let max_u = self.u.iter().fold(0.0_f64, |acc, u| acc.max(u.abs()));
        let mean = dom.mean(&self.u);
        if mean.abs() > 1e-10 * max_u.max(f64::MIN_POSITIVE) && mean.abs() > 1e-300 {
            return Err(Error::invalid(
                "u",
                format!("volume mean {mean:e} is not zero (max |u| = {max_u:e})"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_column_midsurface() {
        let dom = ColumnDomain::uniform(0.0, 1.0, 4).unwrap();
        assert!((dom.m - 0.5).abs() < 1e-15);
        assert!((dom.volume_total - 1.0).abs() < 1e-15);
        assert_eq!(dom.ell, 1.0);
    }

    #[test]
    fn two_area_column_by_hand() {
        let dom = ColumnDomain::build(0.0, 1.0, 2, |z| if z < 0.5 { 1.0 } else { 2.0 }, |_| 0.0)
            .unwrap();
        // cells: z = 0.25 (area 1) and z = 0.75 (area 2), dz = 0.5
        let m = (0.25 * 0.5 + 0.75 * 2.0 * 0.5) / 1.5;
        assert!((dom.m - m).abs() < 1e-15);
        assert!((dom.m - 0.583_333_333_333_333_4).abs() < 1e-12);
        assert!((dom.solid_fraction_above(0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_area_is_rejected_with_height() {
        let err = ColumnDomain::build(0.0, 1.0, 8, |z| if z > 0.5 && z < 0.7 { 0.0 } else { 1.0 }, |_| 0.0)
            .unwrap_err();
        match err {
            Error::Disconnected { height, .. } => assert!(height > 0.5 && height < 0.7),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn solid_fraction_endpoints() {
        let dom = ColumnDomain::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(dom.solid_fraction_above(0.25), 0.75);
        assert_eq!(dom.solid_fraction_above(2.0), 0.0);
        assert_eq!(dom.solid_fraction_above(-1.0), 1.0);
        assert_eq!(dom.solid_fraction_above(dom.a), 1.0);
        assert_eq!(dom.solid_fraction_above(dom.b), 0.0);
    }

    #[test]
    fn normalized_groups() {
        let (p, spec) = preset("normalized").unwrap();
        let dom = spec.build().unwrap();
        let g = derive_dimensionless(&p, &dom);
        assert_eq!(g.d, 0.5);
        assert_eq!(g.g0, 1.0);
        assert_eq!(p.latent_heat, 2.0);
        for v in [p.c, p.kappa, p.lambda, p.nu, p.alpha, p.beta, p.gamma, p.rho0, p.g, p.theta_c] {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn water_groups_match_quoted_magnitudes() {
        let (p, spec) = preset("water").unwrap();
        let dom = spec.build().unwrap();
        let g = derive_dimensionless(&p, &dom);
        assert!(g.d > 0.04 && g.d < 0.07, "d = {}", g.d);
        // G0 ~ 2e4 / ell with ell in meters
        let g0_ell = g.g0 * dom.ell;
        assert!(g0_ell > 1.5e4 && g0_ell < 2.5e4, "G0*ell = {g0_ell}");
        let ratio = p.alpha * p.rho0 * p.g * dom.ell / p.latent_heat;
        assert!((ratio - g.d / g.g0).abs() < 1e-18);
        assert!(ratio > 1.0e-6 && ratio < 1.8e-6, "d/G0 = {ratio}");
    }

    #[test]
    fn zero_gravity_flags_infinite_g0() {
        let mut p = MaterialParams::normalized();
        p.g = 0.0;
        let dom = ColumnDomain::uniform(0.0, 1.0, 4).unwrap();
        assert!(derive_dimensionless(&p, &dom).is_zero_gravity());
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let msg = preset("mercury").unwrap_err().to_string();
        assert!(msg.contains("normalized") && msg.contains("water"));
    }

    #[test]
    fn validation_rejects_bad_constants() {
        let mut p = MaterialParams::normalized();
        p.theta_c = -1.0;
        assert!(p.validate().unwrap_err().to_string().contains("theta_c"));
        let mut p = MaterialParams::normalized();
        p.beta = -0.1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn step_profile_lookup() {
        let prof = Profile::Steps(vec![(0.5, 1.0), (1.0, 2.0)]);
        assert_eq!(prof.eval(0.25), 1.0);
        assert_eq!(prof.eval(0.75), 2.0);
        assert_eq!(prof.eval(5.0), 2.0);
    }
}
