use serde::{Deserialize, Serialize};

use super::{weighted_product_limit, ConditionalSurvival, FitError, Role, SurvivalCurve};
use crate::data::Dataset;

/// Below this kernel mass a query point is treated as extrapolation.
const MIN_EFFECTIVE_SAMPLE: f64 = 5.0;

/// Kernel-weighted conditional product-limit estimator for one covariate.
///
/// Training data is stored sorted by follow-up time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeranModel {
    pub role: Role,
    pub bandwidth: f64,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub event: Vec<bool>,
}

/// `0.5 * sd(w) * n^(-1/5)`, or 1 when the covariate does not vary.
pub fn default_bandwidth(train: &Dataset) -> f64 {
    let n = train.len() as f64;
    let mean = train.records().iter().map(|r| r.w[0]).sum::<f64>() / n;
    let var = train.records().iter().map(|r| (r.w[0] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let h = 0.5 * var.sqrt() * n.powf(-0.2);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1.0
    }
}

pub fn fit_beran(train: &Dataset, role: Role, bandwidth: f64) -> Result<BeranModel, FitError> {
    if train.dim() != 1 {
        return Err(FitError::Dimension {
            model: "beran",
            expected: 1,
            found: train.dim(),
        });
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(FitError::InvalidBandwidth(bandwidth));
    }
    let recs = train.records();
    let mut order: Vec<usize> = (0..recs.len()).collect();
    order.sort_by(|&a, &b| recs[a].y.total_cmp(&recs[b].y));
    Ok(BeranModel {
        role,
        bandwidth,
        w: order.iter().map(|&i| recs[i].w[0]).collect(),
        y: order.iter().map(|&i| recs[i].y).collect(),
        event: order.iter().map(|&i| recs[i].indicator(role.is_censoring())).collect(),
    })
}

impl BeranModel {
    /// Gaussian kernel weights at `x`, in training (time-sorted) order.
    pub fn weights(&self, x: f64) -> Vec<f64> {
        let inv_h = 1.0 / self.bandwidth;
        self.w
            .iter()
            .map(|&wi| {
                let u = (x - wi) * inv_h;
                (-0.5 * u * u).exp()
            })
            .collect()
    }
}

impl ConditionalSurvival for BeranModel {
    fn curve(&self, w: &[f64]) -> SurvivalCurve {
        assert_eq!(w.len(), 1, "beran model takes one covariate");
        let weights = self.weights(w[0]);
        let mass: f64 = weights.iter().sum();
        if mass < MIN_EFFECTIVE_SAMPLE {
            log::warn!(
                "beran: effective sample {mass:.3} < {MIN_EFFECTIVE_SAMPLE} at w = {}; extrapolating",
                w[0]
            );
        }
        weighted_product_limit(&self.y, &self.event, &weights)
    }

    fn dim(&self) -> Option<usize> {
        Some(1)
    }
}
