//! Efficient influence function of the coverage functional and the split
//! one-step coverage estimator.
//!
//! For survival curves `S`, `G` at `w` and a bound `L = L(w)`,
//!
//! ```text
//! phi(o) = S(L) * [1 - ( 1{y <= L, delta = 1} / (S(y) G(y))
//!                        - sum_{t_j <= min(L, y)} dLambda_j / (S(t_j) G(t_j)) )]
//! ```
//!
//! where the sum runs over the jumps of `S` and `dLambda_j` are its hazard
//! increments. The coverage estimate is the calibration mean of `phi`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::LowerBound;
use crate::data::{FullRecord, ObservedRecord};
use crate::normal;
use crate::simgen::{self, RngStream, SettingSpec, SimError};
use crate::survival::{ConditionalSurvival, CurveError, SurvivalCurve, PROB_FLOOR};

#[derive(Debug, Error, PartialEq)]
pub enum EifError {
    #[error("S(u)G(u) = {value:e} below the numeric floor at u = {u} (w = {w:?}); the censoring cap was bypassed")]
    NumericGuard { w: Vec<f64>, u: f64, value: f64 },
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Nuisances `(S, G)` and the bound `L` consumed by `phi`.
#[derive(Clone, Copy)]
pub struct EifContext<'a> {
    pub s_model: &'a dyn ConditionalSurvival,
    pub g_model: &'a dyn ConditionalSurvival,
    pub lpb: &'a dyn LowerBound,
}

/// One-step estimate for a single bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub tau: f64,
    pub psi_hat: f64,
    pub plug_in: f64,
    pub sigma_hat: f64,
    pub clb: f64,
    pub n_cal: usize,
}

impl CoverageReport {
    pub const CSV_HEADER: [&'static str; 6] = ["tau", "psi_hat", "plug_in", "sigma_hat", "clb", "n_cal"];

    /// Wald lower bound `psi_hat - z_beta * sigma_hat / sqrt(n_cal)`.
    pub fn wald_clb(&self, beta: f64) -> f64 {
        self.psi_hat - normal::z_upper(beta) * self.sigma_hat / (self.n_cal as f64).sqrt()
    }
}

/// Neumaier-compensated sum; order-sensitive but reproducible.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// `S` and `G` at one covariate value, with prefix sums of
/// `dLambda_j / (S(t_j) G(t_j))` over the jumps of `S`.
#[derive(Debug, Clone)]
pub struct EifPoint {
    s: SurvivalCurve,
    g: SurvivalCurve,
    jump_times: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EifPoint {
    pub fn new(s: SurvivalCurve, g: SurvivalCurve) -> Result<Self, EifError> {
        let hazard = s.hazard_increments()?;
        let mut acc = 0.0;
        let mut comp = 0.0;
        let cumulative = hazard
            .times
            .iter()
            .zip(&hazard.increments)
            .map(|(&t, &d)| {
                let denom = (s.eval(t) * g.eval(t)).max(PROB_FLOOR);
                let v = d / denom;
                let next = acc + v;
                comp += if acc.abs() >= v.abs() {
                    (acc - next) + v
                } else {
                    (v - next) + acc
                };
                acc = next;
                acc + comp
            })
            .collect();
        Ok(Self {
            s,
            g,
            jump_times: hazard.times,
            cumulative,
        })
    }

    pub fn event_curve(&self) -> &SurvivalCurve {
        &self.s
    }

    pub fn censoring_curve(&self) -> &SurvivalCurve {
        &self.g
    }

    /// Plug-in term `S(L)`.
    pub fn survival_at(&self, bound: f64) -> f64 {
        self.s.eval(bound)
    }

    /// `sum_{t_j <= u} dLambda_j / (S(t_j) G(t_j))`.
    pub fn hazard_integral(&self, u: f64) -> f64 {
        match self.jump_times.partition_point(|&t| t <= u) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    /// Uncentered influence function at an observation `(y, event)` sharing this point's covariates.
    pub fn phi(&self, bound: f64, y: f64, event: bool, w: &[f64]) -> Result<f64, EifError> {
        let sl = self.s.eval(bound);
        let integral = self.hazard_integral(bound.min(y));
        let indicator = if event && y <= bound {
            let denom = self.s.eval(y) * self.g.eval(y);
            if denom < PROB_FLOOR {
                return Err(EifError::NumericGuard {
                    w: w.to_vec(),
                    u: y,
                    value: denom,
                });
            }
            1.0 / denom
        } else {
            0.0
        };
        Ok(sl * (1.0 - (indicator - integral)))
    }
}

/// `phi(S, G; L)(o)`.
pub fn phi(ctx: &EifContext<'_>, o: &ObservedRecord) -> Result<f64, EifError> {
    let point = EifPoint::new(ctx.s_model.curve(&o.w), ctx.g_model.curve(&o.w))?;
    point.phi(ctx.lpb.bound(&o.w), o.y, o.event, &o.w)
}

/// Summarizes per-record `phi` and plug-in values into a report. The variance
/// centers at the plug-in estimate.
pub fn summarize(tau: f64, phis: &[f64], plug_ins: &[f64], beta: f64) -> CoverageReport {
    let n = phis.len();
    let psi_hat = mean(phis);
    let plug_in = mean(plug_ins);
    let sq: Vec<f64> = phis.iter().map(|p| (p - plug_in).powi(2)).collect();
    let sigma_hat = mean(&sq).sqrt();
    let mut report = CoverageReport {
        tau,
        psi_hat,
        plug_in,
        sigma_hat,
        clb: 0.0,
        n_cal: n,
    };
    report.clb = report.wald_clb(beta);
    report
}

/// Split one-step estimator over the calibration records, with a `(1 - beta)` Wald lower bound.
pub fn one_step(ctx: &EifContext<'_>, cal: &[ObservedRecord], beta: f64) -> Result<CoverageReport, EifError> {
    if cal.is_empty() {
        return Err(EifError::EmptyCalibration);
    }
    let mut phis = Vec::with_capacity(cal.len());
    let mut plug = Vec::with_capacity(cal.len());
    for o in cal {
        let point = EifPoint::new(ctx.s_model.curve(&o.w), ctx.g_model.curve(&o.w))?;
        let bound = ctx.lpb.bound(&o.w);
        phis.push(point.phi(bound, o.y, o.event, &o.w)?);
        plug.push(point.survival_at(bound));
    }
    Ok(summarize(ctx.lpb.tau().unwrap_or(f64::NAN), &phis, &plug, beta))
}

/// Both sides of the remainder identity
/// `E0[phi(S, G; L)] - Psi(P0; L) = E0[ S(L) int_(0,L] S0(u-)/S(u) (G0(u)/G(u) - 1) (Lambda - Lambda0)(du) ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderCheck {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub n_mc: usize,
}

impl RemainderCheck {
    /// `|lhs - rhs|` in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let se = (self.lhs_se.powi(2) + self.rhs_se.powi(2)).sqrt();
        (self.lhs - self.rhs).abs() / se
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let n = values.len() as f64;
    let var = compensated_sum(values.iter().map(|v| (v - m).powi(2))) / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

// 8-point Gauss-Legendre on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// `int_a^b f0(u) g(u) du` for the log-normal event density, in `v = log u`.
fn lognormal_weighted_integral(a: f64, b: f64, mu: f64, sigma: f64, g: impl Fn(f64) -> f64) -> f64 {
    let lo_v = if a <= 0.0 { mu - 12.0 * sigma } else { a.ln() };
    let hi_v = b.ln();
    if hi_v <= lo_v {
        return 0.0;
    }
    // split long intervals so the normal kernel stays well resolved
    let pieces = (((hi_v - lo_v) / (0.25 * sigma)).ceil() as usize).clamp(1, 400);
    let width = (hi_v - lo_v) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let left = lo_v + k as f64 * width;
        let half = 0.5 * width;
        let mid = left + half;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let v = mid + half * x;
            let z = (v - mu) / sigma;
            total += wt * half * normal::pdf(z) / sigma * g(v.exp());
        }
    }
    total
}

fn remainder_integrand(
    setting: &SettingSpec,
    s: &SurvivalCurve,
    g: &SurvivalCurve,
    bound: f64,
    w: &[f64],
) -> Result<f64, EifError> {
    let mu = setting.mu(w);
    let sigma = setting.sigma(w);
    let s0 = |u: f64| simgen::true_conditional_survival(setting, u, w);
    let g0 = |u: f64| simgen::true_censoring_survival(setting, u, w);

    // atoms of Lambda
    let hazard = s.hazard_increments()?;
    let mut discrete = 0.0;
    for (&t, &d) in hazard.times.iter().zip(&hazard.increments) {
        if t > bound {
            break;
        }
        let sv = s.eval(t).max(PROB_FLOOR);
        let gv = g.eval(t).max(PROB_FLOOR);
        discrete += s0(t)? / sv * (g0(t)? / gv - 1.0) * d;
    }

    // absolutely continuous Lambda0: S0(u) dLambda0(u) = f0(u) du
    let mut breaks: Vec<f64> = s
        .times()
        .iter()
        .chain(g.times())
        .copied()
        .filter(|&t| t > 0.0 && t < bound)
        .collect();
    breaks.push(0.0);
    breaks.push(bound);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut continuous = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let sv = s.eval(a).max(PROB_FLOOR);
        let gv = g.eval(a).max(PROB_FLOOR);
        let weighted = lognormal_weighted_integral(a, b, mu, sigma, |u| g0(u).unwrap_or(0.0));
        let plain = s0(a)? - s0(b)?;
        continuous += (weighted / gv - plain) / sv;
    }
    Ok(s.eval(bound) * (discrete - continuous))
}

/// Monte-Carlo evaluation of both sides of the remainder identity on a
/// simulation setting with closed-form `S0` and `G0`.
pub fn remainder_check(
    ctx: &EifContext<'_>,
    setting: &SettingSpec,
    n_mc: usize,
    stream: RngStream,
) -> Result<RemainderCheck, EifError> {
    let draws: Vec<FullRecord> = simgen::generate(setting, n_mc, stream)?;
    let mut lhs = Vec::with_capacity(n_mc);
    let mut rhs = Vec::with_capacity(n_mc);
    for r in &draws {
        let o = r.observed();
        let s = ctx.s_model.curve(&o.w);
        let g = ctx.g_model.curve(&o.w);
        let bound = ctx.lpb.bound(&o.w);
        let truth = simgen::true_conditional_survival(setting, bound, &o.w)?;
        rhs.push(remainder_integrand(setting, &s, &g, bound, &o.w)?);
        let point = EifPoint::new(s, g)?;
        lhs.push(point.phi(bound, o.y, o.event, &o.w)? - truth);
    }
    let (l, lse) = mean_and_se(&lhs);
    let (r, rse) = mean_and_se(&rhs);
    Ok(RemainderCheck {
        lhs: l,
        lhs_se: lse,
        rhs: r,
        rhs_se: rse,
        n_mc,
    })
}
