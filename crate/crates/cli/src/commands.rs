use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use tcsurv_core::bench::{self, Evaluation, NuisanceChoice, Oracle, ProportionPoint, RunMetrics, StudyConfig};
use tcsurv_core::calibrate::{self, LowerBound, LpbBundle, LpbFamily, TauGrid};
use tcsurv_core::data::{self, ColumnSpec, DataError};
use tcsurv_core::onestep::CoverageReport;
use tcsurv_core::simgen::{self, RngStream, SettingSpec};
use tcsurv_core::survival::{self, ConditionalSurvival, FitConfig, FittedModel, Role};

use crate::config::{CliConfig, Overrides, Resolved};
use crate::error::CliError;
use crate::{CalibrateArgs, Cli, Command, EvaluateArgs, FitArgs, PredictArgs, ReproduceArgs, SimulateArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(a, &config),
        Command::Fit(a) => fit(a, &config),
        Command::Calibrate(a) => calibrate(a, &config),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a, &config),
        Command::Reproduce(a) => reproduce(a, &config),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn fit_config(bandwidth: Option<f64>) -> FitConfig {
    FitConfig {
        bandwidth,
        ..FitConfig::default()
    }
}

fn simulate(a: SimulateArgs, config: &CliConfig) -> Result<(), CliError> {
    let setting = SettingSpec::new(a.setting)?.with_exp_param(a.exp_param);
    let seed = a.seed.or(config.seed).unwrap_or(0);
    let records = simgen::generate(&setting, a.n, RngStream::new(seed, 0))?;
    data::write_full_csv(&records, setting.dim(), &a.out)?;
    log::info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn fit(a: FitArgs, config: &CliConfig) -> Result<(), CliError> {
    let train = data::read_csv(&a.input, &ColumnSpec::default())?;
    let fallback = match a.role {
        Role::Event => config.event_model,
        Role::Censoring => config.censoring_model,
    };
    let kind = a.model.or(fallback).unwrap_or(survival::ModelKind::Beran);
    let model = survival::fit(kind, &train, a.role, &fit_config(a.bandwidth.or(config.bandwidth)))?;
    write_json(&a.out, &model)
}

fn calibrate(a: CalibrateArgs, config: &CliConfig) -> Result<(), CliError> {
    let flags = Overrides {
        c_prop: a.c_prop,
        event_model: a.event_model,
        censoring_model: a.censoring_model,
        bandwidth: a.bandwidth,
        ..a.calibration.overrides()
    };
    let r = Resolved::new(flags, config)?;
    let grid = TauGrid::uniform(r.grid)?;
    let all = data::read_csv(&a.input, &ColumnSpec::default())?;
    let parts = data::split(&all, r.c_prop, r.seed)?;
    let train = all.subset(&parts.train)?;
    let cal = all.subset(&parts.cal)?;

    let cfg = fit_config(r.bandwidth);
    let s = survival::fit(r.event_model, &train, Role::Event, &cfg)?;
    let g = survival::fit(r.censoring_model, &train, Role::Censoring, &cfg)?;
    let family = LpbFamily::new(Arc::new(s.clone()), Arc::new(g.clone()), r.eta2)?;
    let reports = calibrate::sweep(&family, cal.records(), &grid, r.beta)?;
    let result = calibrate::select(r.rule, &reports, r.alpha, r.beta)?;
    let lpb = calibrate::finalize(&result, &family, true)?;
    log::info!(
        "{} rule selected tau = {:?} from {} calibration records",
        r.rule,
        lpb.tau(),
        cal.len()
    );
    data::write_rows_csv(&a.out_reports, &CoverageReport::CSV_HEADER, &result.reports)?;
    let bundle = LpbBundle {
        event_model: s,
        censoring_model: g,
        tau: result.selected_tau,
        eta2: r.eta2,
        rule: r.rule,
        alpha: r.alpha,
        beta: r.beta,
    };
    write_json(&a.out_bundle, &bundle)
}

/// Rejects covariate rows the bundle's models cannot evaluate.
fn check_dims(bundle: &LpbBundle, rows: impl Iterator<Item = usize>) -> Result<(), CliError> {
    let expected = [&bundle.event_model, &bundle.censoring_model]
        .iter()
        .filter_map(|m: &&FittedModel| m.dim())
        .next();
    if let Some(expected) = expected {
        for found in rows {
            if found != expected {
                return Err(DataError::DimensionMismatch { expected, found }.into());
            }
        }
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let bundle: LpbBundle = read_json(&a.bundle)?;
    let rows = data::read_covariates_csv(&a.input)?;
    check_dims(&bundle, rows.iter().map(Vec::len))?;
    let lpb = bundle.to_function()?;
    let out: Vec<[f64; 1]> = rows.iter().map(|w| [lpb.eval(w)]).collect();
    data::write_rows_csv(&a.out, &["lpb"], &out)?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationReport {
    tau: Option<f64>,
    #[serde(flatten)]
    evaluation: Evaluation,
}

fn evaluate(a: EvaluateArgs, config: &CliConfig) -> Result<(), CliError> {
    let bundle: LpbBundle = read_json(&a.bundle)?;
    let test = data::read_full_csv(&a.input)?;
    check_dims(&bundle, test.iter().map(|r| r.w.len()))?;
    let lpb = bundle.to_function()?;
    let flags = Overrides {
        n_mc: a.n_mc,
        seed: a.seed,
        ..Overrides::default()
    };
    let r = Resolved::new(flags, config)?;
    let setting = a.setting.map(SettingSpec::new).transpose()?;
    let oracle = setting.as_ref().map(|s| Oracle {
        setting: s,
        n_mc: r.n_mc,
        stream: RngStream::new(r.seed, 1),
    });
    let evaluation = bench::evaluate(&lpb, &test, oracle)?;
    let report = EvaluationReport {
        tau: bundle.tau,
        evaluation,
    };
    match &a.out {
        Some(path) => write_json(path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PlotRow {
    n: usize,
    proportion: f64,
    wilson_lo: f64,
    wilson_hi: f64,
}

#[derive(Serialize)]
struct FailureRow<'a> {
    n: usize,
    replicate: usize,
    message: &'a str,
}

fn reproduce(a: ReproduceArgs, config: &CliConfig) -> Result<(), CliError> {
    let flags = Overrides {
        n_mc: a.n_mc,
        ..a.calibration.overrides()
    };
    let r = Resolved::new(flags, config)?;
    if a.reps == 0 {
        return Err(CliError::Usage("reps must be at least 1".into()));
    }
    if a.n.iter().any(|&n| n < 2) {
        return Err(CliError::Usage("every n must be at least 2".into()));
    }
    let setting = SettingSpec::new(a.setting)?;
    let mut base = StudyConfig::new(setting, a.n[0], a.reps, r.rule);
    base.alpha = r.alpha;
    base.beta = r.beta;
    base.eta2 = r.eta2;
    base.grid = TauGrid::uniform(r.grid)?;
    base.n_mc = r.n_mc;
    base.base_seed = r.seed;
    base.nuisance = NuisanceChoice::Auto;
    base.jobs = a.jobs.or(config.jobs).unwrap_or(0);

    fs::create_dir_all(&a.out).map_err(|source| CliError::Io {
        path: a.out.clone(),
        source,
    })?;
    let study = bench::run_study(&base, &a.n)?;
    let points = study.points();
    for p in &points {
        log::info!(
            "n = {}: proportion {:.3} [{:.3}, {:.3}], {} failures",
            p.n,
            p.proportion,
            p.wilson_lo,
            p.wilson_hi,
            p.failures
        );
    }
    data::write_rows_csv(&a.out.join("replicates.csv"), &RunMetrics::CSV_HEADER, &study.metrics())?;
    data::write_rows_csv(&a.out.join("study.csv"), &ProportionPoint::CSV_HEADER, &points)?;
    let plot: Vec<PlotRow> = points
        .iter()
        .map(|p| PlotRow {
            n: p.n,
            proportion: p.proportion,
            wilson_lo: p.wilson_lo,
            wilson_hi: p.wilson_hi,
        })
        .collect();
    data::write_rows_csv(
        &a.out.join("plot_data.csv"),
        &["n", "proportion", "wilson_lo", "wilson_hi"],
        &plot,
    )?;
    let failures: Vec<FailureRow<'_>> = study
        .runs
        .iter()
        .flat_map(|run| {
            run.failures.iter().map(|f| FailureRow {
                n: run.summary.n,
                replicate: f.replicate,
                message: &f.message,
            })
        })
        .collect();
    data::write_rows_csv(&a.out.join("failures.csv"), &["n", "replicate", "message"], &failures)?;
    Ok(())
}
