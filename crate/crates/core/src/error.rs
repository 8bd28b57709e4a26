use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate collinear geometry: crossing angle must be non-zero")]
    DegenerateGeometry,

    #[error("expected event count {expected:.3e} exceeds the limit of {limit:.0e}")]
    ResourceLimit { expected: f64, limit: f64 },

    #[error("no fringes detected (spectral peak {peak_ratio:.2}x the median, need {threshold}x)")]
    NoFringes { peak_ratio: f64, threshold: f64 },

    #[error("too few events in the overlap region: {found} < {required}")]
    InsufficientEvents { found: usize, required: usize },

    #[error("fringe fit did not converge after {iterations} iterations ({detail})")]
    NonConvergence { iterations: usize, detail: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error{}: {message}", .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("missing ground truth for {0}")]
    MissingTruth(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

/// Rejects NaN and infinities.
pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<f64> {
    check_finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be >= 0, got {value}")))
    }
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64, allow_zero: bool) -> Result<f64> {
    check_finite(name, value)?;
    let lower_ok = if allow_zero { value >= 0.0 } else { value > 0.0 };
    if lower_ok && value <= 1.0 {
        Ok(value)
    } else {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        Err(Error::invalid(name, format!("must lie in {range}, got {value}")))
    }
}
