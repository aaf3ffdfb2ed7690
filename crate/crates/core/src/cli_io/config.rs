//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! preset = normalized
//!
//! [material]
//! theta_gamma = 1.0
//!
//! [stepper]
//! dt = 1e-3, t_end = 1
//! ```
//!
//! Top-level keys: `preset`. Sections: `[material]` (any material constant),
//! `[domain]` (`a`, `b`, `n_cells`, `area`, `perimeter`), `[stepper]`,
//! `[initial]` and `[output]` (`dir`, `sample_stride`, `snapshot_stride`). Area and perimeter accept a constant or a
//! step profile `upper:value; upper:value; ...`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evolution::{Scheme, StepperConfig};
use crate::model::{preset, ColumnDomain, DomainSpec, MaterialParams, Profile, StateField};

use super::output::read_snapshot;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Constant fields; `theta0` defaults to `theta_gamma`.
    Uniform { theta0: Option<f64>, u0: f64, chi0: f64 },
    /// `chi_below` under the height `interface`, `chi_above` over it; the
    /// cell containing the interface gets the volume-weighted average.
    Layered {
        theta0: Option<f64>,
        interface: f64,
        chi_below: f64,
        chi_above: f64,
    },
    /// Columns `theta`, `U`, `chi` of a snapshot file.
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub params: MaterialParams,
    pub domain: DomainSpec,
    pub stepper: StepperConfig,
    pub initial: InitialCondition,
    pub output_dir: PathBuf,
    /// Steps between trajectory rows.
    pub sample_stride: usize,
    /// Steps between snapshot files; `0` writes only the initial and final state.
    pub snapshot_stride: usize,
}

const MATERIAL_KEYS: &[&str] = &[
    "c",
    "kappa",
    "lambda",
    "nu",
    "alpha",
    "beta",
    "gamma",
    "latent_heat",
    "rho0",
    "g",
    "theta_c",
    "theta_gamma",
    "h_bottom",
    "h_top",
    "h_lateral",
];

fn material_field<'a>(p: &'a mut MaterialParams, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "c" => &mut p.c,
        "kappa" => &mut p.kappa,
        "lambda" => &mut p.lambda,
        "nu" => &mut p.nu,
        "alpha" => &mut p.alpha,
        "beta" => &mut p.beta,
        "gamma" => &mut p.gamma,
        "latent_heat" => &mut p.latent_heat,
        "rho0" => &mut p.rho0,
        "g" => &mut p.g,
        "theta_c" => &mut p.theta_c,
        "theta_gamma" => &mut p.theta_gamma,
        "h_bottom" => &mut p.h_bottom,
        "h_top" => &mut p.h_top,
        "h_lateral" => &mut p.h_lateral,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Material,
    Domain,
    Stepper,
    Initial,
    Output,
}

impl Section {
    fn name(&self) -> &'static str {
        match self {
            Section::Top => "top level",
            Section::Material => "material",
            Section::Domain => "domain",
            Section::Stepper => "stepper",
            Section::Initial => "initial",
            Section::Output => "output",
        }
    }

    fn accepts(&self, key: &str) -> bool {
        match self {
            Section::Top => key == "preset",
            Section::Material => MATERIAL_KEYS.contains(&key),
            Section::Domain => matches!(key, "a" | "b" | "n_cells" | "area" | "perimeter"),
            Section::Stepper => matches!(
                key,
                "dt" | "t_end"
                    | "scheme"
                    | "r_cutoff"
                    | "picard_tol"
                    | "picard_max_iter"
                    | "picard_window"
                    | "linear_tol"
            ),
            Section::Initial => matches!(
                key,
                "kind" | "theta0" | "u0" | "chi0" | "interface" | "chi_below" | "chi_above" | "path"
            ),
            Section::Output => matches!(key, "dir" | "sample_stride" | "snapshot_stride"),
        }
    }
}

struct Entry {
    section: Section,
    key: String,
    value: String,
    line: usize,
}

fn split_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section = Section::Top;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                message: format!("unterminated section header `{line}`"),
            })?;
            section = match name.trim() {
                "material" => Section::Material,
                "domain" => Section::Domain,
                "stepper" => Section::Stepper,
                "initial" => Section::Initial,
                "output" => Section::Output,
                other => {
                    return Err(Error::ConfigSyntax {
                        line: line_no,
                        message: format!(
                            "unknown section [{other}] (expected material, domain, stepper, initial, output)"
                        ),
                    })
                }
            };
            continue;
        }
        // several `key = value` pairs may share a line, separated by commas
        let pieces: Vec<&str> = if line.matches('=').count() > 1 {
            line.split(',').collect()
        } else {
            vec![line]
        };
        for piece in pieces {
            let (key, value) = piece.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                message: format!("expected `key = value`, found `{}`", piece.trim()),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    message: format!("expected `key = value`, found `{}`", piece.trim()),
                });
            }
            if !section.accepts(key) {
                return Err(Error::UnknownKey {
                    section: section.name().to_string(),
                    key: key.to_string(),
                });
            }
            entries.push(Entry {
                section,
                key: key.to_string(),
                value: value.trim_matches('"').to_string(),
                line: line_no,
            });
        }
    }
    Ok(entries)
}

fn number(e: &Entry) -> Result<f64> {
    e.value.parse::<f64>().map_err(|_| Error::ConfigSyntax {
        line: e.line,
        message: format!("`{}` expects a number, found `{}`", e.key, e.value),
    })
}

fn count(e: &Entry) -> Result<usize> {
    e.value.parse::<usize>().map_err(|_| Error::ConfigSyntax {
        line: e.line,
        message: format!("`{}` expects a nonnegative integer, found `{}`", e.key, e.value),
    })
}

fn profile(e: &Entry) -> Result<Profile> {
    if let Ok(v) = e.value.parse::<f64>() {
        return Ok(Profile::Constant(v));
    }
    let mut steps = Vec::new();
    for part in e.value.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let parsed = part
            .split_once(':')
            .and_then(|(u, v)| Some((u.trim().parse::<f64>().ok()?, v.trim().parse::<f64>().ok()?)));
        match parsed {
            Some(step) => steps.push(step),
            None => {
                return Err(Error::ConfigSyntax {
                    line: e.line,
                    message: format!(
                        "`{}` expects a number or `upper:value; ...` steps, found `{}`",
                        e.key, e.value
                    ),
                })
            }
        }
    }
    if steps.is_empty() {
        return Err(Error::ConfigSyntax {
            line: e.line,
            message: format!("`{}` has an empty profile", e.key),
        });
    }
    Ok(Profile::Steps(steps))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = split_entries(text)?;
    let preset_name = entries
        .iter()
        .rev()
        .find(|e| e.section == Section::Top && e.key == "preset")
        .map(|e| e.value.clone())
        .unwrap_or_else(|| "normalized".to_string());
    let (mut params, mut domain) = preset(&preset_name)?;
    let mut stepper = StepperConfig::default();
    let mut output_dir = PathBuf::from("out");
    let mut sample_stride = stepper.sample_stride;
    let mut snapshot_stride = 0;

    let mut kind: Option<(String, usize)> = None;
    let mut theta0 = None;
    let mut u0 = None;
    let mut chi0 = None;
    let mut interface = None;
    let mut chi_below = None;
    let mut chi_above = None;
    let mut path = None;

    for e in &entries {
        match e.section {
            Section::Top => {}
            Section::Material => {
                let v = number(e)?;
                if let Some(field) = material_field(&mut params, &e.key) {
                    *field = v;
                }
            }
            Section::Domain => match e.key.as_str() {
                "a" => domain.a = number(e)?,
                "b" => domain.b = number(e)?,
                "n_cells" => domain.n_cells = count(e)?,
                "area" => domain.area = profile(e)?,
                "perimeter" => domain.perimeter = profile(e)?,
                _ => unreachable!("filtered by Section::accepts"),
            },
            Section::Stepper => match e.key.as_str() {
                "dt" => stepper.dt = number(e)?,
                "t_end" => stepper.t_end = number(e)?,
                "scheme" => {
                    stepper.scheme = Scheme::parse(&e.value).ok_or_else(|| Error::ConfigSyntax {
                        line: e.line,
                        message: format!(
                            "unknown scheme `{}` (expected coupled_semi_implicit or picard)",
                            e.value
                        ),
                    })?
                }
                "r_cutoff" => stepper.r_cutoff = number(e)?,
                "picard_tol" => stepper.picard_tol = number(e)?,
                "picard_max_iter" => stepper.picard_max_iter = count(e)?,
                "picard_window" => stepper.picard_window = Some(number(e)?),
                "linear_tol" => stepper.linear_tol = number(e)?,
                _ => unreachable!("filtered by Section::accepts"),
            },
            Section::Initial => match e.key.as_str() {
                "kind" => kind = Some((e.value.clone(), e.line)),
                "theta0" => theta0 = Some(number(e)?),
                "u0" => u0 = Some(number(e)?),
                "chi0" => chi0 = Some(number(e)?),
                "interface" => interface = Some(number(e)?),
                "chi_below" => chi_below = Some(number(e)?),
                "chi_above" => chi_above = Some(number(e)?),
                "path" => path = Some(PathBuf::from(&e.value)),
                _ => unreachable!("filtered by Section::accepts"),
            },
            Section::Output => match e.key.as_str() {
                "dir" => output_dir = PathBuf::from(&e.value),
                "sample_stride" => sample_stride = count(e)?,
                "snapshot_stride" => snapshot_stride = count(e)?,
                _ => unreachable!("filtered by Section::accepts"),
            },
        }
    }

    let initial = match kind.as_ref().map(|(k, l)| (k.as_str(), *l)) {
        None | Some(("uniform", _)) => {
            if interface.is_some() || chi_below.is_some() || chi_above.is_some() || path.is_some() {
                return Err(Error::invalid(
                    "initial",
                    "interface/chi_below/chi_above/path need kind = layered or from_file",
                ));
            }
            InitialCondition::Uniform {
                theta0,
                u0: u0.unwrap_or(0.0),
                chi0: chi0.unwrap_or(1.0),
            }
        }
        Some(("layered", _)) => {
            if chi0.is_some() || u0.is_some() || path.is_some() {
                return Err(Error::invalid(
                    "initial",
                    "layered takes theta0, interface, chi_below and chi_above",
                ));
            }
            InitialCondition::Layered {
                theta0,
                interface: interface
                    .ok_or_else(|| Error::invalid("interface", "required for kind = layered"))?,
                chi_below: chi_below.unwrap_or(1.0),
                chi_above: chi_above.unwrap_or(0.0),
            }
        }
        Some(("from_file", _)) => {
            if theta0.is_some() || u0.is_some() || chi0.is_some() || interface.is_some() {
                return Err(Error::invalid("initial", "from_file takes only path"));
            }
            InitialCondition::FromFile(
                path.ok_or_else(|| Error::invalid("path", "required for kind = from_file"))?,
            )
        }
        Some((other, line)) => {
            return Err(Error::ConfigSyntax {
                line,
                message: format!("unknown initial kind `{other}` (expected uniform, layered, from_file)"),
            })
        }
    };

    stepper.sample_stride = sample_stride;
    let cfg = RunConfig {
        preset: preset_name,
        params,
        domain,
        stepper,
        initial,
        output_dir,
        sample_stride,
        snapshot_stride,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    // relative snapshot paths are taken relative to the config file
    if let InitialCondition::FromFile(p) = &mut cfg.initial {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

fn check_unit(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in [0, 1], got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let dom = self.domain.build()?;
        self.stepper.validate(&self.params)?;
        match &self.initial {
            InitialCondition::Uniform { theta0, u0, chi0 } => {
                check_theta0(*theta0)?;
                if !u0.is_finite() {
                    return Err(Error::invalid("u0", "must be finite"));
                }
                check_unit("chi0", *chi0)?;
            }
            InitialCondition::Layered {
                theta0,
                interface,
                chi_below,
                chi_above,
            } => {
                check_theta0(*theta0)?;
                check_unit("chi_below", *chi_below)?;
                check_unit("chi_above", *chi_above)?;
                if !(*interface >= dom.a && *interface <= dom.b) {
                    return Err(Error::invalid(
                        "interface",
                        format!("must lie in [{}, {}], got {interface}", dom.a, dom.b),
                    ));
                }
            }
            InitialCondition::FromFile(_) => {}
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<ColumnDomain> {
        self.domain.build()
    }

    /// Initial state with the volume mean of `U` removed; a warning is logged
    /// when the removed mean exceeds `1e-8`.
    pub fn initial_state(&self, dom: &ColumnDomain) -> Result<StateField> {
        let theta_default = self.params.theta_gamma;
        let mut state = match &self.initial {
            InitialCondition::Uniform { theta0, u0, chi0 } => {
                StateField::uniform(dom, theta0.unwrap_or(theta_default), *u0, *chi0)
            }
            InitialCondition::Layered {
                theta0,
                interface,
                chi_below,
                chi_above,
            } => {
                let mut s = StateField::uniform(dom, theta0.unwrap_or(theta_default), 0.0, 0.0);
                for i in 0..dom.n_cells {
                    let above = dom.volume_above_in_cell(i, *interface) / dom.cell_volume(i);
                    s.chi[i] = chi_below * (1.0 - above) + chi_above * above;
                }
                s
            }
            InitialCondition::FromFile(path) => {
                let snap = read_snapshot(path)?;
                dom.check_len("theta", &snap.theta)?;
                StateField {
                    theta: snap.theta,
                    u: snap.u,
                    chi: snap.chi,
                    t: 0.0,
                }
            }
        };
        let removed = state.project_zero_mean_u(dom);
        if removed.abs() > 1e-8 {
            log::warn!("initial U had volume mean {removed:e}; subtracted to enforce zero mean");
        }
        state.validate(dom)?;
        Ok(state)
    }
}

fn check_theta0(theta0: Option<f64>) -> Result<()> {
    match theta0 {
        Some(t) if !(t.is_finite() && t > 0.0) => {
            Err(Error::invalid("theta0", format!("must be positive, got {t}")))
        }
        _ => Ok(()),
    }
}
