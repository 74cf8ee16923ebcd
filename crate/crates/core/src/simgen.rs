//! Synthetic log-normal survival settings and the Monte-Carlo coverage oracle.
//!
//! Every setting draws `W ~ Unif([0, 4]^p)` and `T | W ~ LogNormal(mu(W), sigma(W)^2)`,
//! where `mu` and `sigma` are the mean and standard deviation of `log T`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FullRecord;
use crate::normal;
use crate::survival::{ConditionalSurvival, Role, SurvivalCurve};

/// Smallest Monte-Carlo sample accepted by [`true_coverage`].
pub const MIN_MC_DRAWS: usize = 1000;
/// Default Monte-Carlo sample for the coverage oracle.
pub const DEFAULT_MC_DRAWS: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown setting {0} (expected 1..=6)")]
    UnknownSetting(u32),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("need at least {MIN_MC_DRAWS} Monte-Carlo draws, got {0}")]
    TooFewDraws(usize),
    #[error("sample size must be positive")]
    EmptySample,
    #[error("covariate dimension mismatch: setting has {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
}

/// A reproducible random stream: identical `(seed, stream)` pairs give identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// How the single parameter of an `Exp(.)` censoring law is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpParam {
    /// `Exp(theta)` has mean `1 / theta`.
    #[default]
    Rate,
    /// `Exp(theta)` has mean `theta`.
    Mean,
}

impl FromStr for ExpParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rate" => Ok(ExpParam::Rate),
            "mean" => Ok(ExpParam::Mean),
            other => Err(format!(
                "unknown exponential parameterization `{other}` (expected rate|mean)"
            )),
        }
    }
}

impl fmt::Display for ExpParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpParam::Rate => "rate",
            ExpParam::Mean => "mean",
        })
    }
}

/// Conditional censoring law of one setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Censoring {
    Exponential(f64),
    LogNormal { mu: f64, sigma: f64 },
}

/// One of the six synthetic settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingSpec {
    pub id: u32,
    #[serde(default)]
    pub exp_param: ExpParam,
    /// Replaces `sigma(w)` everywhere; a test hook for degenerate draws.
    #[serde(default)]
    pub sigma_override: Option<f64>,
}

impl SettingSpec {
    pub fn new(id: u32) -> Result<Self, SimError> {
        if !(1..=6).contains(&id) {
            return Err(SimError::UnknownSetting(id));
        }
        Ok(Self {
            id,
            exp_param: ExpParam::Rate,
            sigma_override: None,
        })
    }

    pub fn with_exp_param(mut self, param: ExpParam) -> Self {
        self.exp_param = param;
        self
    }

    pub fn dim(&self) -> usize {
        if self.id <= 4 {
            1
        } else {
            10
        }
    }

    /// Mean of `log T` given `w`.
    pub fn mu(&self, w: &[f64]) -> f64 {
        let x = w[0];
        match self.id {
            1 => 0.632 * x,
            2 => {
                if x > 2.0 {
                    3.0
                } else {
                    x
                }
            }
            3 => {
                if x > 2.0 {
                    2.0
                } else {
                    x
                }
            }
            4 => {
                if x > 2.0 {
                    3.0
                } else {
                    1.5 * x
                }
            }
            _ => 0.126 * (w[0] + (w[2] * w[4]).sqrt()) + 1.0,
        }
    }

    /// Standard deviation of `log T` given `w`.
    pub fn sigma(&self, w: &[f64]) -> f64 {
        if let Some(s) = self.sigma_override {
            return s;
        }
        match self.id {
            1 => 2.0,
            2..=4 => 0.5,
            5 => 1.0,
            _ => (w[1] + 2.0) / 4.0,
        }
    }

    pub fn censoring(&self, w: &[f64]) -> Censoring {
        let exp = |theta: f64| match self.exp_param {
            ExpParam::Rate => Censoring::Exponential(theta),
            ExpParam::Mean => Censoring::Exponential(1.0 / theta),
        };
        match self.id {
            1 | 2 => exp(0.1),
            3 => exp(0.25 + (6.0 + w[0]) / 100.0),
            4 => Censoring::LogNormal {
                mu: 2.0 + (2.0 - w[0]) / 50.0,
                sigma: 0.5,
            },
            _ => exp(w[9] / 10.0 + 1.0 / 20.0),
        }
    }

    fn check_dim(&self, w: &[f64]) -> Result<(), SimError> {
        if w.len() != self.dim() {
            return Err(SimError::Dimension {
                expected: self.dim(),
                found: w.len(),
            });
        }
        Ok(())
    }

    fn sample_w<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| 4.0 * rng.random::<f64>()).collect()
    }

    fn sample_t<R: Rng>(&self, rng: &mut R, w: &[f64]) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu(w) + self.sigma(w) * z).exp()
    }

    fn sample_c<R: Rng>(&self, rng: &mut R, w: &[f64]) -> f64 {
        match self.censoring(w) {
            Censoring::Exponential(rate) => {
                let e: f64 = rng.sample(Exp1);
                e / rate
            }
            Censoring::LogNormal { mu, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp()
            }
        }
    }
}

/// Draws `n` i.i.d. full records `(W, T, C)`.
pub fn generate(setting: &SettingSpec, n: usize, stream: RngStream) -> Result<Vec<FullRecord>, SimError> {
    if n == 0 {
        return Err(SimError::EmptySample);
    }
    SettingSpec::new(setting.id)?;
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| {
            let w = setting.sample_w(&mut rng);
            let t = setting.sample_t(&mut rng, &w);
            let c = setting.sample_c(&mut rng, &w);
            FullRecord { w, t, c }
        })
        .collect())
}

fn lognormal_sf(t: f64, mu: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if sigma == 0.0 {
        return if t < mu.exp() { 1.0 } else { 0.0 };
    }
    normal::sf((t.ln() - mu) / sigma)
}

/// `S0(t | w) = 1 - Phi((log t - mu(w)) / sigma(w))`.
pub fn true_conditional_survival(setting: &SettingSpec, t: f64, w: &[f64]) -> Result<f64, SimError> {
    if t < 0.0 || t.is_nan() {
        return Err(SimError::NegativeTime(t));
    }
    setting.check_dim(w)?;
    Ok(lognormal_sf(t, setting.mu(w), setting.sigma(w)))
}

/// `G0(t | w) = Pr(C > t | W = w)`.
pub fn true_censoring_survival(setting: &SettingSpec, t: f64, w: &[f64]) -> Result<f64, SimError> {
    if t < 0.0 || t.is_nan() {
        return Err(SimError::NegativeTime(t));
    }
    setting.check_dim(w)?;
    Ok(match setting.censoring(w) {
        Censoring::Exponential(rate) => (-rate * t).exp(),
        Censoring::LogNormal { mu, sigma } => lognormal_sf(t, mu, sigma),
    })
}

/// Conditional `q`-quantile of `T` given `w`.
pub fn true_quantile(setting: &SettingSpec, q: f64, w: &[f64]) -> f64 {
    (setting.mu(w) + setting.sigma(w) * normal::quantile(q)).exp()
}

/// Monte-Carlo estimate of `Pr(T > lpb(W))` over `n_mc` fresh draws.
pub fn true_coverage<F>(setting: &SettingSpec, lpb: F, n_mc: usize, stream: RngStream) -> Result<f64, SimError>
where
    F: Fn(&[f64]) -> f64,
{
    if n_mc < MIN_MC_DRAWS {
        return Err(SimError::TooFewDraws(n_mc));
    }
    SettingSpec::new(setting.id)?;
    let mut rng = stream.rng();
    let mut covered = 0usize;
    for _ in 0..n_mc {
        let w = setting.sample_w(&mut rng);
        let t = setting.sample_t(&mut rng, &w);
        if t > lpb(&w) {
            covered += 1;
        }
    }
    Ok(covered as f64 / n_mc as f64)
}

/// The true event or censoring survival function of a setting, materialized on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub setting: SettingSpec,
    pub role: Role,
    pub grid: Vec<f64>,
}

impl TrueModel {
    pub fn new(setting: SettingSpec, role: Role, grid: Vec<f64>) -> Self {
        Self { setting, role, grid }
    }

    /// Geometric grid of `len` points on `[lo, hi]`.
    pub fn geometric_grid(lo: f64, hi: f64, len: usize) -> Vec<f64> {
        let ratio = (hi / lo).ln() / (len.max(2) - 1) as f64;
        (0..len).map(|i| lo * (ratio * i as f64).exp()).collect()
    }
}

impl ConditionalSurvival for TrueModel {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        let f = |t: f64| match self.role {
            Role::Event => lognormal_sf(t, self.setting.mu(w), self.setting.sigma(w)),
            Role::Censoring => true_censoring_survival(&self.setting, t, w).unwrap_or(0.0),
        };
        SurvivalCurve::materialize(&self.grid, f)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.setting.dim())
    }
}
