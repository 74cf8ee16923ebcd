use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Core(#[from] tcsurv_core::Error),
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

from_core!(
    tcsurv_core::data::DataError,
    tcsurv_core::simgen::SimError,
    tcsurv_core::survival::FitError,
    tcsurv_core::onestep::EifError,
    tcsurv_core::calibrate::CalibrateError,
    tcsurv_core::bench::BenchError
);

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

impl CliError {
    /// 1 for usage problems, 2 for data, fit and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        use tcsurv_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Core(E::Data(_)) => "data",
            CliError::Core(E::Sim(_)) => "simulation",
            CliError::Core(E::Fit(_)) => "fit",
            CliError::Core(E::Curve(_)) => "curve",
            CliError::Core(E::Eif(_)) => "estimation",
            CliError::Core(E::Calibrate(_)) => "calibration",
            CliError::Core(E::Bench(_)) => "bench",
        }
    }

    /// One JSON object per line, for scripts reading stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&ErrorLine {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("error line serializes")
    }
}
