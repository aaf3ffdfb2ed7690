//! CSV writers and the snapshot reader. Floats are written with 17
//! significant digits so snapshots read back bit for bit.

use std::fs::File;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::model::{ColumnDomain, MaterialParams, StateField};
use crate::thermo;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Time label used in snapshot file names: six decimals, trailing zeros dropped.
pub fn time_label(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub const TRAJECTORY_HEADER: [&str; 16] = [
    "t",
    "theta_min",
    "theta_max",
    "theta_mean",
    "u_min",
    "u_max",
    "u_mean",
    "chi_min",
    "chi_max",
    "chi_mean",
    "lyapunov",
    "entropy_production",
    "rate_theta_t",
    "rate_u_t",
    "rate_chi_t",
    "rate_grad_theta",
];

/// Streams one row per sample; every row is flushed so a failing run leaves
/// a readable file behind.
pub struct TrajectoryWriter {
    inner: csv::Writer<File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(TRAJECTORY_HEADER)?;
        inner.flush()?;
        Ok(TrajectoryWriter { inner })
    }

    pub fn append(
        &mut self,
        state: &StateField,
        rec: &DiagnosticsRecord,
        dom: &ColumnDomain,
    ) -> Result<()> {
        let (u_min, u_max) = min_max(&state.u);
        let row = [
            state.t,
            rec.min_theta,
            rec.max_theta,
            dom.mean(&state.theta),
            u_min,
            u_max,
            dom.mean(&state.u),
            rec.min_chi,
            rec.max_chi,
            dom.mean(&state.chi),
            rec.lyapunov,
            rec.entropy_production,
            rec.rate_norms.theta_t,
            rec.rate_norms.u_t,
            rec.rate_norms.chi_t,
            rec.rate_norms.grad_theta,
        ];
        self.inner.write_record(row.iter().map(|&x| fmt_float(x)))?;
        self.inner.flush()?;
        Ok(())
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Writes `z, theta, U, chi, pressure` for every cell.
pub fn write_snapshot(
    path: &Path,
    state: &StateField,
    u_t: &[f64],
    p: &MaterialParams,
    dom: &ColumnDomain,
) -> Result<()> {
    let pressure = thermo::pressure_field(state, u_t, p);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["z", "theta", "U", "chi", "pressure"])?;
    for i in 0..dom.n_cells {
        w.write_record(
            [dom.z_centers[i], state.theta[i], state.u[i], state.chi[i], pressure[i]]
                .iter()
                .map(|&x| fmt_float(x)),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub chi: Vec<f64>,
}

/// Reads the `z`, `theta`, `U`, `chi` columns of a snapshot; other columns
/// are ignored.
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Io(format!("{}: missing column `{name}`", path.display())))
    };
    let (iz, it, iu, ic) = (column("z")?, column("theta")?, column("U")?, column("chi")?);
    let mut snap = Snapshot {
        z: Vec::new(),
        theta: Vec::new(),
        u: Vec::new(),
        chi: Vec::new(),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::Io(format!("{}: bad number in data row {}", path.display(), row + 1))
                })
        };
        snap.z.push(get(iz)?);
        snap.theta.push(get(it)?);
        snap.u.push(get(iu)?);
        snap.chi.push(get(ic)?);
    }
    Ok(snap)
}

pub const EQUILIBRIUM_HEADER: [&str; 6] = [
    "theta_gamma",
    "Z",
    "case",
    "interface_height",
    "solid_fraction",
    "cc_residual",
];

pub const ZERO_GRAVITY_HEADER: [&str; 5] = [
    "theta_gamma",
    "regime",
    "interval_lo",
    "interval_hi",
    "mean_solid_fraction",
];
