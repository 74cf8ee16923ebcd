//! WebAssembly bindings for a single-page demo.
//!
//! Each operation simulates a dataset from one of the six settings, fits the
//! event and censoring models on the training half and reports plot-ready
//! series as JSON. The plain Rust functions are what the tests exercise; the
//! `#[wasm_bindgen]` wrappers only serialize.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tcsurv_core::bench::NuisanceChoice;
use tcsurv_core::calibrate::{self, LpbFamily, TauGrid, DEFAULT_ETA2};
use tcsurv_core::data::{self, Dataset};
use tcsurv_core::simgen::{self, RngStream, SettingSpec};
use tcsurv_core::survival::{self, ConditionalSurvival, FitConfig, FittedModel, ModelKind, Role};
use thiserror::Error;
use wasm_bindgen::prelude::*;

/// Covariates other than the plotted one sit at the centre of their range.
const CENTRE: f64 = 2.0;
const W_MAX: f64 = 4.0;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{0}")]
    Input(String),
    #[error("bad request: {0}")]
    Request(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] tcsurv_core::Error),
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for DemoError {
            fn from(e: $t) -> Self {
                DemoError::Core(e.into())
            }
        }
    )*};
}

from_core!(
    tcsurv_core::data::DataError,
    tcsurv_core::simgen::SimError,
    tcsurv_core::survival::FitError,
    tcsurv_core::calibrate::CalibrateError
);

/// What to simulate and which models to fit. `n` is the size of each half.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub setting: u32,
    pub n: usize,
    pub seed: u64,
    /// `None` picks Beran for one covariate and Cox/Weibull for ten.
    pub event_model: Option<ModelKind>,
    pub censoring_model: Option<ModelKind>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            setting: 1,
            n: 500,
            seed: 1,
            event_model: None,
            censoring_model: None,
        }
    }
}

struct Prepared {
    setting: SettingSpec,
    s: FittedModel,
    g: FittedModel,
    cal: Dataset,
}

impl Scenario {
    fn prepare(&self) -> Result<Prepared, DemoError> {
        if self.n < 10 || self.n > 20_000 {
            return Err(DemoError::Input(format!(
                "n must be between 10 and 20000, got {}",
                self.n
            )));
        }
        let setting = SettingSpec::new(self.setting)?;
        let records = simgen::generate(&setting, 2 * self.n, RngStream::new(self.seed, 0))?;
        let all = Dataset::from_full(&records)?;
        let parts = data::split(&all, 0.5, self.seed)?;
        let train = all.subset(&parts.train)?;
        let (auto_s, auto_g) = NuisanceChoice::Auto.resolve(setting.dim());
        let cfg = FitConfig::default();
        let s = survival::fit(self.event_model.unwrap_or(auto_s), &train, Role::Event, &cfg)?;
        let g = survival::fit(self.censoring_model.unwrap_or(auto_g), &train, Role::Censoring, &cfg)?;
        Ok(Prepared {
            setting,
            s,
            g,
            cal: all.subset(&parts.cal)?,
        })
    }
}

/// Covariate vector with the first coordinate at `w` and the rest at the centre.
pub fn covariate(dim: usize, w: f64) -> Vec<f64> {
    let mut x = vec![CENTRE; dim];
    x[0] = w;
    x
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Curves {
    pub w: Vec<f64>,
    /// Jump times of the fitted event curve.
    pub times: Vec<f64>,
    pub fitted: Vec<f64>,
    /// True `S(t | w)` at the same times.
    pub truth: Vec<f64>,
}

/// Fitted versus true conditional survival at `w1 = w`.
pub fn survival_curves(scenario: &Scenario, w: f64) -> Result<Curves, DemoError> {
    if !(0.0..=W_MAX).contains(&w) {
        return Err(DemoError::Input(format!("w must lie in [0, {W_MAX}], got {w}")));
    }
    let p = scenario.prepare()?;
    let x = covariate(p.setting.dim(), w);
    let curve = p.s.curve(&x);
    let truth = curve
        .times()
        .iter()
        .map(|&t| simgen::true_conditional_survival(&p.setting, t, &x))
        .collect::<Result<_, _>>()?;
    Ok(Curves {
        w: x,
        times: curve.times().to_vec(),
        fitted: curve.probs().to_vec(),
        truth,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundCurve {
    pub tau: f64,
    pub w: Vec<f64>,
    pub lpb: Vec<f64>,
    /// True conditional `alpha`-quantile of the event time, the oracle bound.
    pub oracle: Vec<f64>,
}

/// `L(w)` along the first covariate for a fixed `tau`, beside the oracle quantile.
pub fn bound_curve(scenario: &Scenario, tau: f64, alpha: f64, points: usize) -> Result<BoundCurve, DemoError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DemoError::Input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(2..=1000).contains(&points) {
        return Err(DemoError::Input(format!(
            "points must be between 2 and 1000, got {points}"
        )));
    }
    let p = scenario.prepare()?;
    let family = LpbFamily::new(Arc::new(p.s), Arc::new(p.g), DEFAULT_ETA2)?;
    let lpb = family.at(tau)?;
    let ws: Vec<f64> = (0..points).map(|i| W_MAX * i as f64 / (points - 1) as f64).collect();
    let dim = p.setting.dim();
    Ok(BoundCurve {
        tau,
        lpb: ws.iter().map(|&w| lpb.eval(&covariate(dim, w))).collect(),
        oracle: ws
            .iter()
            .map(|&w| simgen::true_quantile(&p.setting, alpha, &covariate(dim, w)))
            .collect(),
        w: ws,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CoverageSweep {
    pub tau: Vec<f64>,
    pub psi_hat: Vec<f64>,
    pub clb: Vec<f64>,
    /// Coverage of `L_tau` under the true law, averaged over sampled covariates.
    pub true_coverage: Vec<f64>,
    pub apac_tau: Option<f64>,
    pub marginal_tau: Option<f64>,
}

/// Estimated, lower-bounded and true coverage across a uniform `tau` grid.
///
/// True coverage is exact given `w` and averaged over `n_w` fresh covariate draws.
pub fn coverage_sweep(
    scenario: &Scenario,
    alpha: f64,
    beta: f64,
    grid: usize,
    n_w: usize,
) -> Result<CoverageSweep, DemoError> {
    if !(1..=5000).contains(&n_w) {
        return Err(DemoError::Input(format!("n_w must be between 1 and 5000, got {n_w}")));
    }
    let p = scenario.prepare()?;
    let grid = TauGrid::uniform(grid)?;
    let family = LpbFamily::new(Arc::new(p.s.clone()), Arc::new(p.g.clone()), DEFAULT_ETA2)?;
    let reports = calibrate::sweep(&family, p.cal.records(), &grid, beta)?;
    let apac = calibrate::select_apac(&reports, alpha, beta)?;
    let marginal = calibrate::select_marginal(&reports, alpha)?;

    let draws = simgen::generate(&p.setting, n_w, RngStream::new(scenario.seed, 1))?;
    let mut covered = vec![0.0; grid.values().len()];
    for rec in &draws {
        let (s, g) = (p.s.curve(&rec.w), p.g.curve(&rec.w));
        for (acc, &tau) in covered.iter_mut().zip(grid.values()) {
            let bound = calibrate::capped_bound(&s, &g, tau, DEFAULT_ETA2);
            *acc += simgen::true_conditional_survival(&p.setting, bound, &rec.w)?;
        }
    }
    Ok(CoverageSweep {
        tau: grid.values().to_vec(),
        psi_hat: reports.iter().map(|r| r.psi_hat).collect(),
        clb: reports.iter().map(|r| r.clb).collect(),
        true_coverage: covered.iter().map(|c| c / n_w as f64).collect(),
        apac_tau: apac.selected_tau,
        marginal_tau: marginal.selected_tau,
    })
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsValue> {
    r.and_then(|v| Ok(serde_json::to_string(&v)?))
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

fn scenario(json: &str) -> Result<Scenario, DemoError> {
    Ok(serde_json::from_str(json)?)
}

/// `scenario` is a JSON object such as `{"setting": 1, "n": 500, "seed": 1}`.
#[wasm_bindgen(js_name = survivalCurves)]
pub fn survival_curves_js(scenario_json: &str, w: f64) -> Result<String, JsValue> {
    to_js(scenario(scenario_json).and_then(|s| survival_curves(&s, w)))
}

#[wasm_bindgen(js_name = boundCurve)]
pub fn bound_curve_js(scenario_json: &str, tau: f64, alpha: f64, points: usize) -> Result<String, JsValue> {
    to_js(scenario(scenario_json).and_then(|s| bound_curve(&s, tau, alpha, points)))
}

#[wasm_bindgen(js_name = coverageSweep)]
pub fn coverage_sweep_js(
    scenario_json: &str,
    alpha: f64,
    beta: f64,
    grid: usize,
    n_w: usize,
) -> Result<String, JsValue> {
    to_js(scenario(scenario_json).and_then(|s| coverage_sweep(&s, alpha, beta, grid, n_w)))
}
