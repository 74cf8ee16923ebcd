use std::path::Path;

use serde::Deserialize;
use tcsurv_core::calibrate::{Rule, DEFAULT_ETA2, DEFAULT_GRID_SIZE};
use tcsurv_core::simgen::{DEFAULT_MC_DRAWS, MIN_MC_DRAWS};
use tcsurv_core::survival::ModelKind;

use crate::error::CliError;

/// Defaults read from `--config file.json`. Every field is optional; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eta2: Option<f64>,
    pub grid: Option<usize>,
    pub c_prop: Option<f64>,
    pub rule: Option<Rule>,
    pub event_model: Option<ModelKind>,
    pub censoring_model: Option<ModelKind>,
    pub bandwidth: Option<f64>,
    pub seed: Option<u64>,
    pub n_mc: Option<usize>,
    pub jobs: Option<usize>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Calibration settings after layering flags over the config over defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub alpha: f64,
    pub beta: f64,
    pub eta2: f64,
    pub grid: usize,
    pub c_prop: f64,
    pub rule: Rule,
    pub event_model: ModelKind,
    pub censoring_model: ModelKind,
    pub bandwidth: Option<f64>,
    pub seed: u64,
    pub n_mc: usize,
}

/// Flag values that may also come from the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eta2: Option<f64>,
    pub grid: Option<usize>,
    pub c_prop: Option<f64>,
    pub rule: Option<Rule>,
    pub event_model: Option<ModelKind>,
    pub censoring_model: Option<ModelKind>,
    pub bandwidth: Option<f64>,
    pub seed: Option<u64>,
    pub n_mc: Option<usize>,
}

fn open_unit(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl Resolved {
    pub fn new(flags: Overrides, config: &CliConfig) -> Result<Self, CliError> {
        let r = Self {
            alpha: flags.alpha.or(config.alpha).unwrap_or(0.1),
            beta: flags.beta.or(config.beta).unwrap_or(0.05),
            eta2: flags.eta2.or(config.eta2).unwrap_or(DEFAULT_ETA2),
            grid: flags.grid.or(config.grid).unwrap_or(DEFAULT_GRID_SIZE),
            c_prop: flags.c_prop.or(config.c_prop).unwrap_or(0.5),
            rule: flags.rule.or(config.rule).unwrap_or(Rule::Apac),
            event_model: flags.event_model.or(config.event_model).unwrap_or(ModelKind::Beran),
            censoring_model: flags
                .censoring_model
                .or(config.censoring_model)
                .unwrap_or(ModelKind::Beran),
            bandwidth: flags.bandwidth.or(config.bandwidth),
            seed: flags.seed.or(config.seed).unwrap_or(0),
            n_mc: flags.n_mc.or(config.n_mc).unwrap_or(DEFAULT_MC_DRAWS),
        };
        open_unit("alpha", r.alpha)?;
        open_unit("beta", r.beta)?;
        open_unit("eta2", r.eta2)?;
        open_unit("c-prop", r.c_prop)?;
        if r.grid == 0 {
            return Err(CliError::Usage("grid must have at least one point".into()));
        }
        if let Some(h) = r.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::Usage(format!("bandwidth must be positive, got {h}")));
            }
        }
        if r.n_mc < MIN_MC_DRAWS {
            return Err(CliError::Usage(format!(
                "n-mc must be at least {MIN_MC_DRAWS}, got {}",
                r.n_mc
            )));
        }
        Ok(r)
    }
}
