//! Error type shared by every module.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Jones parameters: X²+Y²+Z²+W² = {norm_sq} (must be 1 within 1e-6)")]
    InvalidParameters { norm_sq: f64 },

    #[error("calibration fit did not converge{} after {iterations} iterations (rms residual {residual:e})", grey_suffix(.grey))]
    FitFailure {
        grey: Option<u8>,
        best: [f64; 4],
        residual: f64,
        iterations: usize,
    },

    #[error(
        "no polarizer configuration reaches contrast {required} (best achieved {best_contrast})"
    )]
    ConfigNotFound { required: f64, best_contrast: f64 },

    #[error("transmission {target} outside achievable range [{min}, {max}]{}", slit_suffix(.slit))]
    TransmissionOutOfRange {
        target: f64,
        min: f64,
        max: f64,
        slit: Option<usize>,
    },

    #[error("invalid measurements: {0}")]
    InvalidMeasurements(String),

    #[error("invalid lookup table: {0}")]
    InvalidLut(String),

    #[error("all slit transmissions are zero")]
    DegenerateAperture,

    #[error("invalid aperture: {0}")]
    InvalidAperture(String),

    #[error("slit index {index} not in aperture index set of {n_slits} slits")]
    SlitIndexOutOfRange { index: f64, n_slits: usize },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("dimension mismatch: state has {state} amplitudes, aperture has {slits} slits")]
    DimensionMismatch { state: usize, slits: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("window [{lo}, {hi}] contains fewer than 2 grid points")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn grey_suffix(grey: &Option<u8>) -> String {
    grey.map(|g| format!(" at grey level {g}"))
        .unwrap_or_default()
}

fn slit_suffix(slit: &Option<usize>) -> String {
    slit.map(|s| format!(" for slit {s}")).unwrap_or_default()
}

impl Error {
    /// Stable machine-readable code printed by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameters { .. } => "E_INVALID_PARAMS",
            Error::FitFailure { .. } => "E_FIT_DIVERGED",
            Error::ConfigNotFound { .. } => "E_CONFIG_NOT_FOUND",
            Error::TransmissionOutOfRange { .. } => "E_T_UNACHIEVABLE",
            Error::InvalidMeasurements(_) => "E_MEASUREMENTS",
            Error::InvalidLut(_) => "E_LUT",
            Error::DegenerateAperture => "E_DEGENERATE_APERTURE",
            Error::InvalidAperture(_) => "E_APERTURE",
            Error::SlitIndexOutOfRange { .. } => "E_SLIT_INDEX",
            Error::Geometry(_) => "E_GEOMETRY",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::InvalidState(_) => "E_STATE",
            Error::EmptyWindow { .. } => "E_EMPTY_WINDOW",
            Error::DegenerateProfile(_) => "E_DEGENERATE_PROFILE",
            Error::Config(_) => "E_CONFIG",
            Error::Parse { .. } => "E_PARSE",
            Error::Io { .. } => "E_IO",
        }
    }

    /// Process exit status: 2 config error, 3 numerical failure, 4 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::FitFailure { .. }
            | Error::ConfigNotFound { .. }
            | Error::DegenerateProfile(_) => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl std::fmt::Display, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            message: message.into(),
        }
    }
}
