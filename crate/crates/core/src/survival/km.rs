use serde::{Deserialize, Serialize};

use super::{weighted_product_limit, ConditionalSurvival, Role, SurvivalCurve};
use crate::data::Dataset;

/// Covariate-free product-limit estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmModel {
    pub role: Role,
    pub curve: SurvivalCurve,
}

impl ConditionalSurvival for KmModel {
    fn curve(&self, _w: &[f64]) -> SurvivalCurve {
        self.curve.clone()
    }
}

/// Product-limit curve `prod_{t_j <= t} (1 - d_j / n_j)` for the given indicator.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> SurvivalCurve {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let t: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let e: Vec<bool> = order.iter().map(|&i| events[i]).collect();
    weighted_product_limit(&t, &e, &vec![1.0; t.len()])
}

pub fn fit_km(train: &Dataset, role: Role) -> KmModel {
    let times: Vec<f64> = train.records().iter().map(|r| r.y).collect();
    let events: Vec<bool> = train
        .records()
        .iter()
        .map(|r| r.indicator(role.is_censoring()))
        .collect();
    KmModel {
        role,
        curve: kaplan_meier(&times, &events),
    }
}
