//! Conditional survival estimation.
//!
//! Every fitter produces a model that maps a covariate vector to a
//! [`SurvivalCurve`]. The same fitters serve the event-time role and, with the
//! indicator reversed, the censoring role.

mod beran;
mod cox;
mod curve;
mod km;
mod weibull;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

pub use beran::{default_bandwidth, fit_beran, BeranModel};
pub use cox::{fit_cox, CoxConfig, CoxModel};
pub use curve::{CurveError, HazardIncrements, Quantile, SurvivalCurve, PROB_FLOOR};
pub use km::{fit_km, kaplan_meier, KmModel};
pub use weibull::{fit_weibull, WeibullConfig, WeibullModel};

/// A fitted conditional survival function `w -> S(. | w)`.
pub trait ConditionalSurvival: Send + Sync {
    /// The step curve at `w`. Panics if `w` has the wrong dimension.
    fn curve(&self, w: &[f64]) -> SurvivalCurve;

    /// Required covariate dimension, if the model depends on covariates.
    fn dim(&self) -> Option<usize> {
        None
    }
}

impl<M: ConditionalSurvival + ?Sized> ConditionalSurvival for &M {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        (**self).curve(w)
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
}

impl<M: ConditionalSurvival + ?Sized> ConditionalSurvival for std::sync::Arc<M> {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        (**self).curve(w)
    }
    fn dim(&self) -> Option<usize> {
        (**self).dim()
    }
}

/// Which time a model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// `S(t | w) = Pr(T > t | W = w)`.
    Event,
    /// `G(t | w) = Pr(C > t | W = w)`, fit with the indicator reversed.
    Censoring,
}

impl Role {
    pub fn is_censoring(self) -> bool {
        matches!(self, Role::Censoring)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Event => "event",
            Role::Censoring => "censoring",
        })
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "event" => Ok(Role::Event),
            "censoring" => Ok(Role::Censoring),
            other => Err(format!("unknown role `{other}` (expected event|censoring)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cox,
    Weibull,
    Km,
    Beran,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cox => "cox",
            ModelKind::Weibull => "weibull",
            ModelKind::Km => "km",
            ModelKind::Beran => "beran",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cox" => Ok(ModelKind::Cox),
            "weibull" => Ok(ModelKind::Weibull),
            "km" => Ok(ModelKind::Km),
            "beran" => Ok(ModelKind::Beran),
            other => Err(format!("unknown model `{other}` (expected cox|weibull|km|beran)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("no {role} events in the training data")]
    NoEvents { role: Role },
    #[error("need at least {needed} {role} events, found {found}")]
    TooFewEvents { role: Role, needed: usize, found: usize },
    #[error("did not converge after {iterations} iterations (max |score| = {max_score:e})")]
    NotConverged { iterations: usize, max_score: f64 },
    #[error("information matrix is not positive definite at iteration {iteration} (possible separation)")]
    Singular { iteration: usize },
    #[error("coefficients diverge at iteration {iteration} (max |beta * sd(w)| = {scaled:.1}); data look separated")]
    Separated { iteration: usize, scaled: f64 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("{model} needs {expected} covariate(s), data has {found}")]
    Dimension {
        model: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Fitter settings shared by the CLI and the replication harness.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    #[serde(default)]
    pub cox: CoxConfig,
    #[serde(default)]
    pub weibull: WeibullConfig,
    /// Beran bandwidth; `None` uses [`default_bandwidth`].
    #[serde(default)]
    pub bandwidth: Option<f64>,
}

/// A fitted model of any supported kind. Serializes to a JSON document tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Cox(CoxModel),
    Weibull(WeibullModel),
    Km(KmModel),
    Beran(BeranModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Cox(_) => ModelKind::Cox,
            FittedModel::Weibull(_) => ModelKind::Weibull,
            FittedModel::Km(_) => ModelKind::Km,
            FittedModel::Beran(_) => ModelKind::Beran,
        }
    }

    pub fn role(&self) -> Role {
        match self {
            FittedModel::Cox(m) => m.role,
            FittedModel::Weibull(m) => m.role,
            FittedModel::Km(m) => m.role,
            FittedModel::Beran(m) => m.role,
        }
    }
}

impl ConditionalSurvival for FittedModel {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        match self {
            FittedModel::Cox(m) => m.curve(w),
            FittedModel::Weibull(m) => m.curve(w),
            FittedModel::Km(m) => m.curve(w),
            FittedModel::Beran(m) => m.curve(w),
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            FittedModel::Cox(m) => m.dim(),
            FittedModel::Weibull(m) => m.dim(),
            FittedModel::Km(m) => m.dim(),
            FittedModel::Beran(m) => m.dim(),
        }
    }
}

/// Fits a model of the requested kind.
pub fn fit(kind: ModelKind, train: &Dataset, role: Role, config: &FitConfig) -> Result<FittedModel, FitError> {
    Ok(match kind {
        ModelKind::Cox => FittedModel::Cox(fit_cox(train, role, &config.cox)?),
        ModelKind::Weibull => FittedModel::Weibull(fit_weibull(train, role, &config.weibull)?),
        ModelKind::Km => FittedModel::Km(fit_km(train, role)),
        ModelKind::Beran => {
            let h = match config.bandwidth {
                Some(h) => h,
                None => default_bandwidth(train),
            };
            FittedModel::Beran(fit_beran(train, role, h)?)
        }
    })
}

pub(crate) fn count_events(train: &Dataset, role: Role) -> usize {
    train
        .records()
        .iter()
        .filter(|r| r.indicator(role.is_censoring()))
        .count()
}

/// Indices of covariate columns that are not constant over `train`.
pub(crate) fn varying_columns(train: &Dataset) -> Vec<usize> {
    (0..train.dim())
        .filter(|&j| {
            let (lo, hi) = train
                .records()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.w[j]), hi.max(r.w[j]))
                });
            hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1.0)
        })
        .collect()
}

/// Weighted product-limit estimate over records sorted by ascending time.
///
/// Every distinct time carrying an event becomes a grid point (with a zero
/// jump when its weighted event mass vanishes). Risk-set sums are accumulated
/// from the largest time downward.
pub(crate) fn weighted_product_limit(times: &[f64], events: &[bool], weights: &[f64]) -> SurvivalCurve {
    debug_assert!(times.windows(2).all(|p| p[0] <= p[1]));
    let n = times.len();
    let mut at_risk = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += weights[i];
        at_risk[i] = acc;
    }
    let mut grid = Vec::new();
    let mut probs = Vec::new();
    let mut s = 1.0_f64;
    let mut i = 0;
    while i < n {
        let t = times[i];
        let start = i;
        let mut d = 0.0;
        let mut any_event = false;
        while i < n && times[i] == t {
            if events[i] {
                d += weights[i];
                any_event = true;
            }
            i += 1;
        }
        if any_event {
            let r = at_risk[start];
            if r > 0.0 && d > 0.0 {
                s *= (1.0 - d / r).max(0.0);
            }
            grid.push(t);
            probs.push(s);
        }
    }
    SurvivalCurve::from_sorted(grid, probs)
}
