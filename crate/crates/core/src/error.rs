use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is out of range: {requirement}")]
    Domain { name: &'static str, value: f64, requirement: &'static str },

    #[error("carrier frequency {0:e} Hz is not covered by the absorption table")]
    FrequencyNotCovered(f64),

    #[error("invalid absorption table: {0}")]
    InvalidAbsorptionTable(String),

    #[error("invalid channel geometry: {0}")]
    InvalidGeometry(String),

    #[error("channel is opaque: largest singular value {0:e} is below the 1e-30 floor")]
    OpaqueChannel(f64),

    #[error("eigenmode transmittance {0} exceeds 1; the link budget is non-physical at this geometry")]
    NonPhysicalTransmittance(f64),

    #[error("mode index {index} out of range for a {n_modes}-mode state")]
    ModeIndex { index: usize, n_modes: usize },

    #[error("mode index {0} listed more than once")]
    DuplicateMode(usize),

    #[error("transform acts on {expected} modes but {got} indices were given")]
    ModeCount { expected: usize, got: usize },

    #[error("matrix is not symplectic: |S Omega S^T - Omega| = {0:e}")]
    NotSymplectic(f64),

    #[error("unphysical Gaussian state: {0}")]
    Unphysical(String),

    #[error("measured quadrature has vanishing variance ({0:e})")]
    SingularMeasurement(f64),

    #[error("approximate eigenvalue discriminant is negative ({0:e})")]
    NegativeDiscriminant(f64),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("target rate {target:e} is not bracketed: rate({d_lo} m) = {rate_lo:e}, rate({d_hi} m) = {rate_hi:e}")]
    Bracketing { target: f64, d_lo: f64, d_hi: f64, rate_lo: f64, rate_hi: f64 },

    #[error("rate is not decreasing in distance between {d_a} m and {d_b} m")]
    NonMonotone { d_a: f64, d_b: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("config error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, requirement: &'static str) -> Self {
        Error::Domain { name, value, requirement }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the numerics (bracketing, unphysical states, opaque
    /// channels) as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Parse { .. }
                | Error::Domain { .. }
                | Error::FrequencyNotCovered(_)
                | Error::Config { .. }
                | Error::Io { .. }
                | Error::InvalidAbsorptionTable(_)
                | Error::InvalidGeometry(_)
                | Error::InvalidSweep(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
