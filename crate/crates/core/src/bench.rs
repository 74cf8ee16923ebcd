//! Replication harness: simulate, fit, calibrate and score many independent
//! training/calibration/test draws.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{self, CalibrateError, LowerBound, LpbFamily, Rule, TauGrid};
use crate::data::{DataError, Dataset, FullRecord, ObservedRecord};
use crate::normal;
use crate::simgen::{self, RngStream, SettingSpec, SimError, DEFAULT_MC_DRAWS};
use crate::survival::{self, FitConfig, FitError, ModelKind, Role};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("test set is empty")]
    EmptyTest,
    #[error("need at least one replicate")]
    NoReplicates,
    #[error("wilson interval needs successes <= trials and trials > 0 (got {successes}/{trials})")]
    BadCounts { successes: usize, trials: usize },
    #[error("could not build a thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
}

/// Test-set scores of one bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_test: usize,
    /// Fraction of test records with `T > L(W)`.
    pub empirical_coverage: f64,
    pub average_lpb: f64,
    /// `Pr(T > L(W))` under the data-generating law, when known.
    pub true_coverage: Option<f64>,
}

/// Closed-form oracle used for the true coverage.
#[derive(Debug, Clone, Copy)]
pub struct Oracle<'a> {
    pub setting: &'a SettingSpec,
    pub n_mc: usize,
    pub stream: RngStream,
}

pub fn evaluate(
    lpb: &dyn LowerBound,
    test: &[FullRecord],
    oracle: Option<Oracle<'_>>,
) -> Result<Evaluation, BenchError> {
    if test.is_empty() {
        return Err(BenchError::EmptyTest);
    }
    let bounds: Vec<f64> = test.iter().map(|r| lpb.bound(&r.w)).collect();
    let covered = test.iter().zip(&bounds).filter(|(r, &l)| r.t > l).count();
    let n = test.len() as f64;
    let true_coverage = match oracle {
        Some(o) => Some(simgen::true_coverage(o.setting, |w| lpb.bound(w), o.n_mc, o.stream)?),
        None => None,
    };
    Ok(Evaluation {
        n_test: test.len(),
        empirical_coverage: covered as f64 / n,
        average_lpb: bounds.iter().sum::<f64>() / n,
        true_coverage,
    })
}

/// Two-sided Wilson score interval for a binomial proportion at confidence `level`.
pub fn wilson_interval(successes: usize, trials: usize, level: f64) -> Result<(f64, f64), BenchError> {
    if trials == 0 || successes > trials {
        return Err(BenchError::BadCounts { successes, trials });
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal::quantile(0.5 + level / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Which fitters supply `S` and `G` in each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NuisanceChoice {
    /// Beran for both roles with one covariate; Cox for `S` and Weibull for `G` otherwise.
    Auto,
    Fixed {
        event: ModelKind,
        censoring: ModelKind,
    },
}

impl NuisanceChoice {
    pub fn resolve(self, dim: usize) -> (ModelKind, ModelKind) {
        match self {
            NuisanceChoice::Fixed { event, censoring } => (event, censoring),
            NuisanceChoice::Auto if dim == 1 => (ModelKind::Beran, ModelKind::Beran),
            NuisanceChoice::Auto => (ModelKind::Cox, ModelKind::Weibull),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub setting: SettingSpec,
    /// Size of each of the training, calibration and test parts.
    pub n: usize,
    pub reps: usize,
    pub rule: Rule,
    pub alpha: f64,
    pub beta: f64,
    pub base_seed: u64,
    pub grid: TauGrid,
    pub eta2: f64,
    pub n_mc: usize,
    pub nuisance: NuisanceChoice,
    pub fit: FitConfig,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

impl StudyConfig {
    pub fn new(setting: SettingSpec, n: usize, reps: usize, rule: Rule) -> Self {
        Self {
            setting,
            n,
            reps,
            rule,
            alpha: 0.1,
            beta: 0.05,
            base_seed: 0,
            grid: TauGrid::default(),
            eta2: calibrate::DEFAULT_ETA2,
            n_mc: DEFAULT_MC_DRAWS,
            nuisance: NuisanceChoice::Auto,
            fit: FitConfig::default(),
            jobs: 0,
        }
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub replicate: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
    /// Empty when the fallback `L = 0` was used.
    pub selected_tau: Option<f64>,
    pub empirical_coverage: f64,
    pub average_lpb: f64,
    pub true_coverage: f64,
}

impl RunMetrics {
    pub const CSV_HEADER: [&'static str; 9] = [
        "replicate",
        "seed",
        "n_train",
        "n_cal",
        "n_test",
        "selected_tau",
        "empirical_coverage",
        "average_lpb",
        "true_coverage",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replicate: usize,
    pub message: String,
}

/// Study-level summary at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionPoint {
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    /// Share of successful replicates with true coverage at least `1 - alpha`.
    pub proportion: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_true_coverage: f64,
    pub mean_lpb: f64,
}

impl ProportionPoint {
    pub const CSV_HEADER: [&'static str; 8] = [
        "n",
        "reps",
        "failures",
        "proportion",
        "wilson_lo",
        "wilson_hi",
        "mean_true_coverage",
        "mean_lpb",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replications {
    pub metrics: Vec<RunMetrics>,
    pub failures: Vec<Failure>,
    pub summary: ProportionPoint,
}

fn observed(records: &[FullRecord]) -> Vec<ObservedRecord> {
    records.iter().map(FullRecord::observed).collect()
}

/// Runs one replicate. Data use stream `2r` and the coverage oracle stream `2r + 1`.
pub fn run_replicate(config: &StudyConfig, replicate: usize) -> Result<RunMetrics, BenchError> {
    let n = config.n;
    let r = replicate as u64;
    let data = simgen::generate(&config.setting, 3 * n, RngStream::new(config.base_seed, 2 * r))?;
    let train = Dataset::new(observed(&data[..n]))?;
    let cal = observed(&data[n..2 * n]);
    let test = &data[2 * n..];

    let (s_kind, g_kind) = config.nuisance.resolve(config.setting.dim());
    let s_model = survival::fit(s_kind, &train, Role::Event, &config.fit)?;
    let g_model = survival::fit(g_kind, &train, Role::Censoring, &config.fit)?;
    let family = LpbFamily::new(Arc::new(s_model), Arc::new(g_model), config.eta2)?;
    let reports = calibrate::sweep(&family, &cal, &config.grid, config.beta)?;
    let result = calibrate::select(config.rule, &reports, config.alpha, config.beta)?;
    let lpb = calibrate::finalize(&result, &family, true)?;
    let oracle = Oracle {
        setting: &config.setting,
        n_mc: config.n_mc,
        stream: RngStream::new(config.base_seed, 2 * r + 1),
    };
    let eval = evaluate(&lpb, test, Some(oracle))?;
    Ok(RunMetrics {
        replicate,
        seed: config.base_seed,
        n_train: n,
        n_cal: n,
        n_test: eval.n_test,
        selected_tau: result.selected_tau,
        empirical_coverage: eval.empirical_coverage,
        average_lpb: eval.average_lpb,
        true_coverage: eval.true_coverage.expect("oracle supplied"),
    })
}

fn run_all(config: &StudyConfig) -> Result<Vec<Result<RunMetrics, BenchError>>, BenchError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let go = || {
            (0..config.reps)
                .into_par_iter()
                .map(|r| run_replicate(config, r))
                .collect::<Vec<_>>()
        };
        if config.jobs == 0 {
            Ok(go())
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.jobs)
                .build()
                .map_err(|e| BenchError::ThreadPool(e.to_string()))?;
            Ok(pool.install(go))
        }
    }
    #[cfg(not(feature = "parallel"))]
    Ok((0..config.reps).map(|r| run_replicate(config, r)).collect())
}

/// Runs `config.reps` replicates. Failed replicates are logged, counted and
/// left out of the summary; results are ordered by replicate index.
pub fn run_replications(config: &StudyConfig) -> Result<Replications, BenchError> {
    if config.reps == 0 {
        return Err(BenchError::NoReplicates);
    }
    let mut metrics = Vec::with_capacity(config.reps);
    let mut failures = Vec::new();
    for (replicate, outcome) in run_all(config)?.into_iter().enumerate() {
        match outcome {
            Ok(m) => metrics.push(m),
            Err(e) => {
                log::warn!("replicate {replicate} failed: {e}");
                failures.push(Failure {
                    replicate,
                    message: e.to_string(),
                });
            }
        }
    }
    let ok = metrics.len();
    let hits = metrics.iter().filter(|m| m.true_coverage >= 1.0 - config.alpha).count();
    let (wilson_lo, wilson_hi) = if ok > 0 {
        wilson_interval(hits, ok, 0.95)?
    } else {
        (0.0, 1.0)
    };
    let mean = |f: fn(&RunMetrics) -> f64| {
        if ok == 0 {
            f64::NAN
        } else {
            metrics.iter().map(f).sum::<f64>() / ok as f64
        }
    };
    let summary = ProportionPoint {
        n: config.n,
        reps: config.reps,
        failures: failures.len(),
        proportion: if ok == 0 { f64::NAN } else { hits as f64 / ok as f64 },
        wilson_lo,
        wilson_hi,
        mean_true_coverage: mean(|m| m.true_coverage),
        mean_lpb: mean(|m| m.average_lpb),
    };
    Ok(Replications {
        metrics,
        failures,
        summary,
    })
}

/// Replications at several calibration sizes, sharing every other setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionStudy {
    pub setting: u32,
    pub rule: Rule,
    pub alpha: f64,
    pub runs: Vec<Replications>,
}

impl ProportionStudy {
    pub fn points(&self) -> Vec<ProportionPoint> {
        self.runs.iter().map(|r| r.summary).collect()
    }

    pub fn metrics(&self) -> Vec<RunMetrics> {
        self.runs.iter().flat_map(|r| r.metrics.iter().cloned()).collect()
    }

    /// Proportions never decrease with `n`, up to `slack`.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.points()
            .windows(2)
            .all(|p| p[1].proportion >= p[0].proportion - slack)
    }
}

pub fn run_study(base: &StudyConfig, ns: &[usize]) -> Result<ProportionStudy, BenchError> {
    let mut runs = Vec::with_capacity(ns.len());
    for &n in ns {
        let config = StudyConfig { n, ..base.clone() };
        runs.push(run_replications(&config)?);
    }
    Ok(ProportionStudy {
        setting: base.setting.id,
        rule: base.rule,
        alpha: base.alpha,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::ConstantBound;

    #[test]
    fn wilson_anchors() {
        let z = normal::quantile(0.975);
        let (lo, hi) = wilson_interval(10, 10, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!((lo - 10.0 / (10.0 + z * z)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - z * z / (10.0 + z * z)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert!(wilson_interval(3, 2, 0.95).is_err());
        assert!(wilson_interval(0, 0, 0.95).is_err());
    }

    #[test]
    fn evaluate_counts_strict_exceedance() {
        let test: Vec<FullRecord> = [0.5, 1.0, 2.0, 3.0]
            .iter()
            .map(|&t| FullRecord {
                w: vec![0.0],
                t,
                c: f64::INFINITY,
            })
            .collect();
        let e = evaluate(&ConstantBound(1.0), &test, None).unwrap();
        assert_eq!(e.empirical_coverage, 0.5);
        assert_eq!(e.average_lpb, 1.0);
        assert_eq!(e.true_coverage, None);
        assert!(evaluate(&ConstantBound(1.0), &[], None).is_err());
    }

    #[test]
    fn auto_nuisances() {
        assert_eq!(NuisanceChoice::Auto.resolve(1), (ModelKind::Beran, ModelKind::Beran));
        assert_eq!(NuisanceChoice::Auto.resolve(10), (ModelKind::Cox, ModelKind::Weibull));
    }
}
