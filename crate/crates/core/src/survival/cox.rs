use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{count_events, varying_columns, ConditionalSurvival, FitError, Role, SurvivalCurve};
use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxConfig {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute score component.
    pub tolerance: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tolerance: 1e-8,
        }
    }
}

/// Largest allowed `|beta_j| * sd(w_j)`; beyond it the fit is treated as separated.
const SEPARATION_LIMIT: f64 = 25.0;

/// Proportional hazards model with a Breslow baseline.
///
/// The curve at `w` is the product integral of the Breslow hazard scaled by
/// the relative risk, `prod_{t_j <= t} (1 - dH0_j)^{exp(beta'(w - center))}`,
/// which reduces to Kaplan-Meier when `beta = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub role: Role,
    pub coefficients: Vec<f64>,
    pub center: Vec<f64>,
    pub times: Vec<f64>,
    pub baseline_increments: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

struct Design {
    /// Time-descending order.
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    event: Vec<bool>,
}

struct Eval {
    loglik: f64,
    score: DVector<f64>,
    info: DMatrix<f64>,
}

impl Design {
    /// Breslow partial log-likelihood, score and observed information.
    fn evaluate(&self, beta: &DVector<f64>, derivatives: bool) -> Eval {
        let p = beta.len();
        let mut loglik = 0.0;
        let mut score = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(p);
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        let n = self.y.len();
        let mut i = 0;
        while i < n {
            let t = self.y[i];
            let mut d = 0usize;
            let mut xsum = DVector::<f64>::zeros(p);
            let mut eta_sum = 0.0;
            while i < n && self.y[i] == t {
                let x = DVector::from_column_slice(&self.x[i]);
                let eta = beta.dot(&x);
                let r = eta.exp();
                s0 += r;
                if derivatives {
                    s1.axpy(r, &x, 1.0);
                    s2.ger(r, &x, &x, 1.0);
                }
                if self.event[i] {
                    d += 1;
                    eta_sum += eta;
                    if derivatives {
                        xsum += &x;
                    }
                }
                i += 1;
            }
            if d > 0 {
                let df = d as f64;
                loglik += eta_sum - df * s0.ln();
                if derivatives {
                    let mean = &s1 / s0;
                    score += xsum - df * &mean;
                    info += df * (&s2 / s0 - &mean * mean.transpose());
                }
            }
        }
        Eval { loglik, score, info }
    }
}

pub fn fit_cox(train: &Dataset, role: Role, config: &CoxConfig) -> Result<CoxModel, FitError> {
    let p = train.dim();
    let events = count_events(train, role);
    if events == 0 {
        return Err(FitError::NoEvents { role });
    }
    if events < p + 2 {
        return Err(FitError::TooFewEvents {
            role,
            needed: p + 2,
            found: events,
        });
    }
    let recs = train.records();
    let n = recs.len() as f64;
    let center: Vec<f64> = (0..p).map(|j| recs.iter().map(|r| r.w[j]).sum::<f64>() / n).collect();
    let active = varying_columns(train);

    let mut order: Vec<usize> = (0..recs.len()).collect();
    order.sort_by(|&a, &b| recs[b].y.total_cmp(&recs[a].y));
    let design = Design {
        x: order
            .iter()
            .map(|&i| active.iter().map(|&j| recs[i].w[j] - center[j]).collect())
            .collect(),
        y: order.iter().map(|&i| recs[i].y).collect(),
        event: order.iter().map(|&i| recs[i].indicator(role.is_censoring())).collect(),
    };

    let k = active.len();
    let sds: Vec<f64> = active
        .iter()
        .map(|&j| (recs.iter().map(|r| (r.w[j] - center[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let mut beta = DVector::<f64>::zeros(k);
    let mut iterations = 0;
    let mut current = design.evaluate(&beta, true);
    loop {
        let max_score = current.score.amax();
        if k == 0 || max_score <= config.tolerance {
            break;
        }
        if iterations >= config.max_iter {
            return Err(FitError::NotConverged { iterations, max_score });
        }
        iterations += 1;
        let chol = current
            .info
            .clone()
            .cholesky()
            .ok_or(FitError::Singular { iteration: iterations })?;
        let step = chol.solve(&current.score);
        let mut scale = 1.0;
        loop {
            let candidate = &beta + scale * &step;
            let trial = design.evaluate(&candidate, false);
            if trial.loglik.is_finite() && trial.loglik >= current.loglik - 1e-12 * current.loglik.abs() {
                beta = candidate;
                current = design.evaluate(&beta, true);
                break;
            }
            scale *= 0.5;
            if scale < 1e-10 {
                return Err(FitError::NotConverged { iterations, max_score });
            }
        }
        let scaled = beta.iter().zip(&sds).map(|(b, s)| (b * s).abs()).fold(0.0, f64::max);
        if scaled > SEPARATION_LIMIT {
            return Err(FitError::Separated {
                iteration: iterations,
                scaled,
            });
        }
    }

    let mut coefficients = vec![0.0; p];
    for (slot, &j) in active.iter().enumerate() {
        coefficients[j] = beta[slot];
    }

    // Breslow increments on ascending event times.
    let mut times = Vec::new();
    let mut baseline_increments = Vec::new();
    let mut s0 = 0.0;
    let nrec = design.y.len();
    let mut i = 0;
    let mut rev = Vec::new();
    while i < nrec {
        let t = design.y[i];
        let mut d = 0usize;
        while i < nrec && design.y[i] == t {
            s0 += design.x[i].iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp();
            d += usize::from(design.event[i]);
            i += 1;
        }
        if d > 0 {
            rev.push((t, d as f64 / s0));
        }
    }
    for (t, h) in rev.into_iter().rev() {
        times.push(t);
        baseline_increments.push(h);
    }

    Ok(CoxModel {
        role,
        coefficients,
        center,
        times,
        baseline_increments,
        iterations,
        log_likelihood: current.loglik,
    })
}

impl CoxModel {
    pub fn relative_risk(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.coefficients.len(), "covariate dimension mismatch");
        w.iter()
            .zip(&self.center)
            .zip(&self.coefficients)
            .map(|((x, c), b)| (x - c) * b)
            .sum::<f64>()
            .exp()
    }
}

impl ConditionalSurvival for CoxModel {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        let r = self.relative_risk(w);
        let mut s = 1.0_f64;
        let probs = self
            .baseline_increments
            .iter()
            .map(|&h| {
                let base = (1.0 - h).max(0.0);
                s *= if base == 0.0 { 0.0 } else { base.powf(r) };
                s
            })
            .collect();
        SurvivalCurve::from_sorted(self.times.clone(), probs)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.coefficients.len())
    }
}
