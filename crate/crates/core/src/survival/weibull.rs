use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{count_events, varying_columns, ConditionalSurvival, FitError, Role, SurvivalCurve};
use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullConfig {
    pub max_iter: usize,
    /// Convergence threshold on max |score| per training record.
    pub tolerance: f64,
    /// Evaluation grid for the materialized curve; defaults to the distinct training times.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
}

impl Default for WeibullConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tolerance: 1e-10,
            grid: None,
        }
    }
}

/// Weibull accelerated failure time model
/// `log T = intercept + beta'w + scale * eps`, `eps` standard minimum-Gumbel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullModel {
    pub role: Role,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub scale: f64,
    pub grid: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl WeibullModel {
    pub fn shape(&self) -> f64 {
        1.0 / self.scale
    }

    /// `lambda(w) = exp(intercept + beta'w)`.
    pub fn characteristic_time(&self, w: &[f64]) -> f64 {
        assert_eq!(w.len(), self.coefficients.len(), "covariate dimension mismatch");
        (self.intercept + w.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()).exp()
    }

    /// Closed-form `exp(-(t / lambda(w))^k)`.
    pub fn survival_at(&self, w: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        (-(t / self.characteristic_time(w)).powf(self.shape())).exp()
    }
}

impl ConditionalSurvival for WeibullModel {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        let lambda = self.characteristic_time(w);
        let k = self.shape();
        SurvivalCurve::materialize(&self.grid, |t| (-(t / lambda).powf(k)).exp())
    }

    fn dim(&self) -> Option<usize> {
        Some(self.coefficients.len())
    }
}

struct Problem {
    /// Rows `[1, w - center]` over active columns.
    x: Vec<Vec<f64>>,
    log_y: Vec<f64>,
    event: Vec<bool>,
}

impl Problem {
    /// Log-likelihood (up to the constant `-sum delta log y`) in `theta = (beta, log scale)`.
    fn loglik(&self, theta: &DVector<f64>) -> f64 {
        let q = theta.len() - 1;
        let s = theta[q];
        let b = s.exp();
        self.x
            .iter()
            .zip(&self.log_y)
            .zip(&self.event)
            .map(|((x, &ly), &e)| {
                let eta: f64 = x.iter().zip(theta.iter()).map(|(a, c)| a * c).sum();
                let z = (ly - eta) / b;
                (if e { z - s } else { 0.0 }) - z.exp()
            })
            .sum()
    }

    fn derivatives(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let q = theta.len() - 1;
        let b = theta[q].exp();
        let mut g = DVector::zeros(q + 1);
        let mut h = DMatrix::zeros(q + 1, q + 1);
        for ((x, &ly), &e) in self.x.iter().zip(&self.log_y).zip(&self.event) {
            let eta: f64 = x.iter().zip(theta.iter()).map(|(a, c)| a * c).sum();
            let z = (ly - eta) / b;
            let ez = z.exp();
            let d = if e { 1.0 } else { 0.0 };
            let r = d - ez;
            for j in 0..q {
                g[j] -= r * x[j] / b;
                for k in 0..=j {
                    h[(j, k)] -= ez * x[j] * x[k] / (b * b);
                }
                h[(q, j)] += (-ez * z + r) * x[j] / b;
            }
            g[q] += -r * z - d;
            h[(q, q)] += -ez * z * z + r * z;
        }
        for j in 0..=q {
            for k in 0..j {
                h[(k, j)] = h[(j, k)];
            }
        }
        (g, h)
    }
}

pub fn fit_weibull(train: &Dataset, role: Role, config: &WeibullConfig) -> Result<WeibullModel, FitError> {
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
    let active = varying_columns(train);
    let center: Vec<f64> = active
        .iter()
        .map(|&j| recs.iter().map(|r| r.w[j]).sum::<f64>() / n)
        .collect();
    // zero follow-up times carry no information for log T; nudge them
    let tiny = recs
        .iter()
        .map(|r| r.y)
        .filter(|&y| y > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
        * 1e-3;
    let problem = Problem {
        x: recs
            .iter()
            .map(|r| {
                std::iter::once(1.0)
                    .chain(active.iter().zip(&center).map(|(&j, c)| r.w[j] - c))
                    .collect()
            })
            .collect(),
        log_y: recs.iter().map(|r| r.y.max(tiny).ln()).collect(),
        event: recs.iter().map(|r| r.indicator(role.is_censoring())).collect(),
    };

    let q = active.len() + 1;
    let mut theta = DVector::zeros(q + 1);
    let ev_logs: Vec<f64> = problem
        .log_y
        .iter()
        .zip(&problem.event)
        .filter_map(|(&l, &e)| e.then_some(l))
        .collect();
    let m = ev_logs.iter().sum::<f64>() / ev_logs.len() as f64;
    let sd = (ev_logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / ev_logs.len() as f64).sqrt();
    theta[0] = m + 0.5772 * sd * 6f64.sqrt() / std::f64::consts::PI;
    theta[q] = (sd * 6f64.sqrt() / std::f64::consts::PI).max(1e-3).ln();

    let tol = config.tolerance * n;
    let mut ll = problem.loglik(&theta);
    let mut iterations = 0;
    loop {
        let (g, h) = problem.derivatives(&theta);
        let max_score = g.amax();
        if max_score <= tol {
            break;
        }
        if iterations >= config.max_iter {
            return Err(FitError::NotConverged { iterations, max_score });
        }
        iterations += 1;
        let info = -h;
        let mut ridge = 0.0;
        let step = loop {
            let mut a = info.clone();
            for j in 0..=q {
                a[(j, j)] += ridge;
            }
            if let Some(chol) = a.cholesky() {
                break chol.solve(&g);
            }
            ridge = if ridge == 0.0 {
                1e-8 * (1.0 + info.diagonal().amax())
            } else {
                ridge * 10.0
            };
            if ridge > 1e12 {
                return Err(FitError::Singular { iteration: iterations });
            }
        };
        let mut scale = 1.0;
        loop {
            let candidate = &theta + scale * &step;
            let trial = problem.loglik(&candidate);
            if trial.is_finite() && trial >= ll - 1e-12 * ll.abs() {
                theta = candidate;
                ll = trial;
                break;
            }
            scale *= 0.5;
            if scale < 1e-12 {
                return Err(FitError::NotConverged { iterations, max_score });
            }
        }
    }

    let mut coefficients = vec![0.0; p];
    let mut intercept = theta[0];
    for (slot, (&j, c)) in active.iter().zip(&center).enumerate() {
        coefficients[j] = theta[slot + 1];
        intercept -= theta[slot + 1] * c;
    }
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => {
            let mut g: Vec<f64> = recs.iter().map(|r| r.y).collect();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
    };
    let log_y_total: f64 = problem
        .log_y
        .iter()
        .zip(&problem.event)
        .filter_map(|(&l, &e)| e.then_some(l))
        .sum();
    Ok(WeibullModel {
        role,
        intercept,
        coefficients,
        scale: theta[q].exp(),
        grid,
        iterations,
        log_likelihood: ll - log_y_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ObservedRecord;

    fn model(intercept: f64, beta: f64, scale: f64) -> WeibullModel {
        WeibullModel {
            role: Role::Event,
            intercept,
            coefficients: vec![beta],
            scale,
            grid: vec![0.5, 1.0, 2.0],
            iterations: 0,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn closed_form_anchors() {
        let m = model(0.3, -0.2, 0.7);
        for w in [0.0, 1.0, 3.5] {
            assert_eq!(m.survival_at(&[w], 0.0), 1.0);
            let lam = m.characteristic_time(&[w]);
            assert!((m.survival_at(&[w], lam) - (-1.0f64).exp()).abs() < 1e-15);
        }
        let c = model(0.0, 0.0, 1.0).curve(&[0.0]);
        assert!((c.eval(1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(c.eval(0.1), 1.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let recs: Vec<ObservedRecord> = (0..30)
            .map(|i| {
                let w = (i % 7) as f64 * 0.5;
                ObservedRecord::new(vec![w], 0.3 + (i * 37 % 11) as f64 * 0.4, i % 4 != 0).unwrap()
            })
            .collect();
        let problem = Problem {
            x: recs.iter().map(|r| vec![1.0, r.w[0] - 1.5]).collect(),
            log_y: recs.iter().map(|r| r.y.ln()).collect(),
            event: recs.iter().map(|r| r.event).collect(),
        };
        let theta = DVector::from_vec(vec![0.4, 0.2, -0.3]);
        let (g, h) = problem.derivatives(&theta);
        let eps = 1e-6;
        for j in 0..3 {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += eps;
            dn[j] -= eps;
            let fd = (problem.loglik(&up) - problem.loglik(&dn)) / (2.0 * eps);
            assert!(
                (fd - g[j]).abs() < 1e-5 * (1.0 + g[j].abs()),
                "g[{j}]: {fd} vs {}",
                g[j]
            );
            let (gu, _) = problem.derivatives(&up);
            let (gd, _) = problem.derivatives(&dn);
            for k in 0..3 {
                let fd = (gu[k] - gd[k]) / (2.0 * eps);
                assert!(
                    (fd - h[(k, j)]).abs() < 1e-4 * (1.0 + fd.abs()),
                    "h[{k},{j}]: {fd} vs {}",
                    h[(k, j)]
                );
            }
        }
    }
}
