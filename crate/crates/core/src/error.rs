use thiserror::Error;

/// Errors raised by the model, the solvers and the command-line layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("container is disconnected: cross-section area {area} at height {height} is not positive")]
    Disconnected { height: f64, area: f64 },

    #[error("unknown preset `{0}` (valid presets: normalized, water)")]
    UnknownPreset(String),

    #[error("liquid fraction {value} in cell {cell} lies outside [0, 1]")]
    PhaseOutOfRange { cell: usize, value: f64 },

    #[error("field `{field}` has {found} cells, domain has {expected}")]
    ShapeMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("gravity is zero: equilibria are not unique, use the zero-gravity analysis")]
    ZeroGravity,

    #[error("zero-gravity analysis requested with g = {0}")]
    GravityPresent(f64),

    #[error("Clausius-Clapeyron residual is only defined for an interface equilibrium")]
    NotInterface,

    #[error("gradient-flow mode requires the normalized material constants ({0})")]
    NotNormalized(String),

    #[error(
        "temperature lost positivity at t = {t}: cell {cell} reached {value}; reduce the time step"
    )]
    PositivityLoss { t: f64, cell: usize, value: f64 },

    #[error("tridiagonal residual {residual:e} exceeds tolerance {tol:e}")]
    LinearSolve { residual: f64, tol: f64 },

    #[error("Picard iteration did not converge in {iterations} iterations (factors: {factors:?})")]
    PicardDiverged { iterations: usize, factors: Vec<f64> },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("config: unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
