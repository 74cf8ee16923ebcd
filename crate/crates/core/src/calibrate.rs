//! Lower prediction bounds and the choice of `tau`.
//!
//! The family `L_tau(w) = min(S^{-1}(1 - tau | w), G^{-1}(eta2 | w))` is
//! nondecreasing in `tau`. Calibration estimates coverage for every `tau` on
//! a grid and keeps the largest `tau` whose whole prefix passes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ObservedRecord;
use crate::onestep::{summarize, CoverageReport, EifError, EifPoint};
use crate::survival::{ConditionalSurvival, FittedModel, SurvivalCurve};

pub const DEFAULT_ETA2: f64 = 1e-3;
pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_TAU_MAX: f64 = 0.99;

pub type SharedModel = Arc<dyn ConditionalSurvival>;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrateError {
    #[error("tau must lie in [0, 1), got {0}")]
    InvalidTau(f64),
    #[error("eta2 must lie in (0, 1), got {0}")]
    InvalidEta2(f64),
    #[error("{name} must lie in (0, 1), got {value}")]
    InvalidLevel { name: &'static str, value: f64 },
    #[error("tau grid must be nonempty, increasing and inside [0, 1)")]
    InvalidGrid,
    #[error("no tau on the grid passes the {rule} rule at alpha = {alpha}")]
    NothingSelected { rule: Rule, alpha: f64 },
    #[error(transparent)]
    Eif(#[from] EifError),
}

/// Anything that maps covariates to a lower bound on `T`.
pub trait LowerBound: Send + Sync {
    fn bound(&self, w: &[f64]) -> f64;

    /// The calibrated `tau`, when the bound comes from the family.
    fn tau(&self) -> Option<f64> {
        None
    }
}

/// `L(w) = c` for every `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBound(pub f64);

impl LowerBound for ConstantBound {
    fn bound(&self, _w: &[f64]) -> f64 {
        self.0
    }
}

/// Wraps a closure as a bound.
pub struct FnBound<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Send + Sync> LowerBound for FnBound<F> {
    fn bound(&self, w: &[f64]) -> f64 {
        (self.0)(w)
    }
}

/// `min(S^{-1}(1 - tau), G^{-1}(eta2))` from the two curves at one `w`.
///
/// A quantile that is never reached resolves to the last grid time of its
/// curve. A censoring curve with no jumps leaves the bound uncapped.
pub fn capped_bound(s: &SurvivalCurve, g: &SurvivalCurve, tau: f64, eta2: f64) -> f64 {
    let event_q = s.quantile_unchecked(1.0 - tau).time;
    let cap = if g.is_empty() {
        f64::INFINITY
    } else {
        g.quantile_unchecked(eta2).time
    };
    event_q.min(cap)
}

/// A single member of the family, or the trivial bound `L = 0`.
#[derive(Clone)]
pub enum LpbFunction {
    Capped {
        tau: f64,
        eta2: f64,
        s_model: SharedModel,
        g_model: SharedModel,
    },
    Zero,
}

impl LpbFunction {
    pub fn eval(&self, w: &[f64]) -> f64 {
        match self {
            LpbFunction::Capped {
                tau,
                eta2,
                s_model,
                g_model,
            } => capped_bound(&s_model.curve(w), &g_model.curve(w), *tau, *eta2),
            LpbFunction::Zero => 0.0,
        }
    }
}

impl fmt::Debug for LpbFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpbFunction::Capped { tau, eta2, .. } => f
                .debug_struct("Capped")
                .field("tau", tau)
                .field("eta2", eta2)
                .finish_non_exhaustive(),
            LpbFunction::Zero => f.write_str("Zero"),
        }
    }
}

impl LowerBound for LpbFunction {
    fn bound(&self, w: &[f64]) -> f64 {
        self.eval(w)
    }

    fn tau(&self) -> Option<f64> {
        match self {
            LpbFunction::Capped { tau, .. } => Some(*tau),
            LpbFunction::Zero => None,
        }
    }
}

/// Nuisance fits and the censoring-cap level shared by every `tau`.
#[derive(Clone)]
pub struct LpbFamily {
    s_model: SharedModel,
    g_model: SharedModel,
    eta2: f64,
}

impl LpbFamily {
    pub fn new(s_model: SharedModel, g_model: SharedModel, eta2: f64) -> Result<Self, CalibrateError> {
        if !(eta2 > 0.0 && eta2 < 1.0) {
            return Err(CalibrateError::InvalidEta2(eta2));
        }
        Ok(Self { s_model, g_model, eta2 })
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    pub fn event_model(&self) -> &SharedModel {
        &self.s_model
    }

    pub fn censoring_model(&self) -> &SharedModel {
        &self.g_model
    }

    pub fn at(&self, tau: f64) -> Result<LpbFunction, CalibrateError> {
        if !(0.0..1.0).contains(&tau) {
            return Err(CalibrateError::InvalidTau(tau));
        }
        Ok(LpbFunction::Capped {
            tau,
            eta2: self.eta2,
            s_model: Arc::clone(&self.s_model),
            g_model: Arc::clone(&self.g_model),
        })
    }
}

/// Increasing candidate values of `tau` in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauGrid(Vec<f64>);

impl TauGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, CalibrateError> {
        let ok = !values.is_empty()
            && values.iter().all(|t| (0.0..1.0).contains(t))
            && values.windows(2).all(|p| p[0] < p[1]);
        if ok {
            Ok(Self(values))
        } else {
            Err(CalibrateError::InvalidGrid)
        }
    }

    /// `k` equally spaced values from 0 to 0.99.
    pub fn uniform(k: usize) -> Result<Self, CalibrateError> {
        match k {
            0 => Err(CalibrateError::InvalidGrid),
            1 => Ok(Self(vec![0.0])),
            _ => Ok(Self(
                (0..k).map(|i| i as f64 * DEFAULT_TAU_MAX / (k - 1) as f64).collect(),
            )),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Default for TauGrid {
    fn default() -> Self {
        Self::uniform(DEFAULT_GRID_SIZE).expect("default grid is valid")
    }
}

fn check_level(name: &'static str, value: f64) -> Result<(), CalibrateError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(CalibrateError::InvalidLevel { name, value })
    }
}

/// Per-record `phi` and `S(L)` for every grid value.
fn record_terms(family: &LpbFamily, grid: &[f64], o: &ObservedRecord) -> Result<Vec<(f64, f64)>, EifError> {
    let point = EifPoint::new(family.s_model.curve(&o.w), family.g_model.curve(&o.w))?;
    grid.iter()
        .map(|&tau| {
            let bound = capped_bound(point.event_curve(), point.censoring_curve(), tau, family.eta2);
            Ok((point.phi(bound, o.y, o.event, &o.w)?, point.survival_at(bound)))
        })
        .collect()
}

/// One-step coverage reports for every `tau` on the grid.
///
/// Curves are built once per calibration record; each `phi` then costs a
/// binary search. Records are processed in parallel when the `parallel`
/// feature is on, and reductions run in record order, so results do not
/// depend on the thread count.
pub fn sweep(
    family: &LpbFamily,
    cal: &[ObservedRecord],
    grid: &TauGrid,
    beta: f64,
) -> Result<Vec<CoverageReport>, CalibrateError> {
    check_level("beta", beta)?;
    if cal.is_empty() {
        return Err(EifError::EmptyCalibration.into());
    }
    let taus = grid.values();
    #[cfg(feature = "parallel")]
    let terms: Vec<Vec<(f64, f64)>> = {
        use rayon::prelude::*;
        cal.par_iter()
            .map(|o| record_terms(family, taus, o))
            .collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let terms: Vec<Vec<(f64, f64)>> = cal
        .iter()
        .map(|o| record_terms(family, taus, o))
        .collect::<Result<_, _>>()?;

    let mut phis = vec![0.0; cal.len()];
    let mut plug = vec![0.0; cal.len()];
    Ok(taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            for (i, row) in terms.iter().enumerate() {
                (phis[i], plug[i]) = row[k];
            }
            summarize(tau, &phis, &plug, beta)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    /// Training-set conditional: the lower confidence bound must clear `1 - alpha`.
    Apac,
    /// Marginal: the point estimate must clear `1 - alpha`.
    Marginal,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Apac => "apac",
            Rule::Marginal => "marginal",
        })
    }
}

impl FromStr for Rule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "apac" => Ok(Rule::Apac),
            "marginal" => Ok(Rule::Marginal),
            other => Err(format!("unknown rule `{other}` (expected apac|marginal)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// `None` when not even the first grid value passes.
    pub selected_tau: Option<f64>,
    pub reports: Vec<CoverageReport>,
    pub rule: Rule,
    pub alpha: f64,
    /// Confidence level of the lower bound; unused by the marginal rule.
    pub beta: Option<f64>,
}

/// Largest `tau` such that `passes` holds on the whole grid prefix up to it.
fn select_prefix(
    reports: &[CoverageReport],
    passes: impl Fn(&CoverageReport) -> bool,
) -> (Option<f64>, Vec<CoverageReport>) {
    let mut sorted = reports.to_vec();
    sorted.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let selected = sorted.iter().take_while(|r| passes(r)).last().map(|r| r.tau);
    (selected, sorted)
}

/// Keeps the largest `tau` whose prefix has `psi_hat - z_beta sigma_hat / sqrt(n) >= 1 - alpha`.
///
/// The bound is recomputed at `beta` from each report's estimate and spread.
pub fn select_apac(reports: &[CoverageReport], alpha: f64, beta: f64) -> Result<CalibrationResult, CalibrateError> {
    check_level("alpha", alpha)?;
    check_level("beta", beta)?;
    let (selected_tau, reports) = select_prefix(reports, |r| r.wald_clb(beta) >= 1.0 - alpha);
    Ok(CalibrationResult {
        selected_tau,
        reports,
        rule: Rule::Apac,
        alpha,
        beta: Some(beta),
    })
}

/// Keeps the largest `tau` whose prefix has `psi_hat >= 1 - alpha`.
pub fn select_marginal(reports: &[CoverageReport], alpha: f64) -> Result<CalibrationResult, CalibrateError> {
    check_level("alpha", alpha)?;
    let (selected_tau, reports) = select_prefix(reports, |r| r.psi_hat >= 1.0 - alpha);
    Ok(CalibrationResult {
        selected_tau,
        reports,
        rule: Rule::Marginal,
        alpha,
        beta: None,
    })
}

pub fn select(
    rule: Rule,
    reports: &[CoverageReport],
    alpha: f64,
    beta: f64,
) -> Result<CalibrationResult, CalibrateError> {
    match rule {
        Rule::Apac => select_apac(reports, alpha, beta),
        Rule::Marginal => {
            let mut r = select_marginal(reports, alpha)?;
            r.beta = Some(beta);
            Ok(r)
        }
    }
}

/// The calibrated bound. An empty selection falls back to `L = 0` with a
/// warning when `fallback_zero` is set.
pub fn finalize(
    result: &CalibrationResult,
    family: &LpbFamily,
    fallback_zero: bool,
) -> Result<LpbFunction, CalibrateError> {
    match result.selected_tau {
        Some(tau) => family.at(tau),
        None if fallback_zero => {
            log::warn!(
                "no tau passes the {} rule at alpha = {}; using the trivial bound L = 0",
                result.rule,
                result.alpha
            );
            Ok(LpbFunction::Zero)
        }
        None => Err(CalibrateError::NothingSelected {
            rule: result.rule,
            alpha: result.alpha,
        }),
    }
}

/// Serializable form of a calibrated bound: the two fits plus the chosen `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpbBundle {
    pub event_model: FittedModel,
    pub censoring_model: FittedModel,
    /// `None` means the trivial bound `L = 0`.
    pub tau: Option<f64>,
    pub eta2: f64,
    pub rule: Rule,
    pub alpha: f64,
    pub beta: f64,
}

impl LpbBundle {
    pub fn to_function(&self) -> Result<LpbFunction, CalibrateError> {
        match self.tau {
            Some(tau) => LpbFamily::new(
                Arc::new(self.event_model.clone()),
                Arc::new(self.censoring_model.clone()),
                self.eta2,
            )?
            .at(tau),
            None => Ok(LpbFunction::Zero),
        }
    }
}
