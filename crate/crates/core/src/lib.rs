//! Lower prediction bounds for right-censored survival times that hold with
//! high probability over the draw of the training data.
//!
//! The pipeline fits conditional survival models for the event time (`S`) and
//! the censoring time (`G`) on a training split, builds the family
//! `L_tau(w) = min(S^{-1}(1 - tau | w), G^{-1}(eta2 | w))`, estimates the
//! coverage `Pr(T > L_tau(W))` of each member on a calibration split with a
//! doubly robust one-step estimator, and keeps the largest `tau` whose lower
//! confidence bound (or point estimate, for the marginal rule) clears
//! `1 - alpha`.
//!
//! ```
//! use std::sync::Arc;
//! use tcsurv_core::{calibrate, data, simgen, survival};
//!
//! let setting = simgen::SettingSpec::new(1).unwrap();
//! let full = simgen::generate(&setting, 400, simgen::RngStream::new(7, 0)).unwrap();
//! let all = data::Dataset::from_full(&full).unwrap();
//! let parts = data::split(&all, 0.5, 11).unwrap();
//! let train = all.subset(&parts.train).unwrap();
//! let cal = all.subset(&parts.cal).unwrap();
//!
//! let cfg = survival::FitConfig::default();
//! let s = survival::fit(survival::ModelKind::Beran, &train, survival::Role::Event, &cfg).unwrap();
//! let g = survival::fit(survival::ModelKind::Beran, &train, survival::Role::Censoring, &cfg).unwrap();
//! let family = calibrate::LpbFamily::new(Arc::new(s), Arc::new(g), 1e-3).unwrap();
//! let reports = calibrate::sweep(&family, cal.records(), &calibrate::TauGrid::default(), 0.05).unwrap();
//! let chosen = calibrate::select_apac(&reports, 0.1, 0.05).unwrap();
//! let lpb = calibrate::finalize(&chosen, &family, true).unwrap();
//! assert!(lpb.eval(&[1.0]) >= 0.0);
//! ```

pub mod bench;
pub mod calibrate;
pub mod data;
pub mod normal;
pub mod onestep;
pub mod simgen;
pub mod survival;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Sim(#[from] simgen::SimError),
    #[error(transparent)]
    Fit(#[from] survival::FitError),
    #[error(transparent)]
    Curve(#[from] survival::CurveError),
    #[error(transparent)]
    Eif(#[from] onestep::EifError),
    #[error(transparent)]
    Calibrate(#[from] calibrate::CalibrateError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
}
