use tcsurv_web::{bound_curve, covariate, coverage_sweep, survival_curves, survival_curves_js, Scenario};

fn scenario(setting: u32) -> Scenario {
    Scenario {
        setting,
        n: 400,
        seed: 9,
        ..Scenario::default()
    }
}

#[test]
fn fitted_curve_tracks_the_truth() {
    let c = survival_curves(&scenario(1), 1.5).unwrap();
    assert_eq!(c.times.len(), c.fitted.len());
    assert_eq!(c.times.len(), c.truth.len());
    assert!(c.fitted.windows(2).all(|p| p[1] <= p[0]));
    assert!(c.truth.windows(2).all(|p| p[1] <= p[0]));
    let worst = c
        .fitted
        .iter()
        .zip(&c.truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.2, "sup gap {worst}");
}

#[test]
fn ten_dimensional_settings_use_the_centre_for_other_covariates() {
    let c = survival_curves(&scenario(5), 0.5).unwrap();
    assert_eq!(c.w, covariate(10, 0.5));
    assert!(!c.times.is_empty());
}

#[test]
fn bound_grows_with_tau() {
    let low = bound_curve(&scenario(2), 0.3, 0.1, 25).unwrap();
    let high = bound_curve(&scenario(2), 0.9, 0.1, 25).unwrap();
    assert_eq!(low.w.len(), 25);
    assert_eq!(low.oracle, high.oracle);
    for (a, b) in low.lpb.iter().zip(&high.lpb) {
        assert!(*a >= 0.0 && a <= b, "{a} > {b}");
    }
}

#[test]
fn sweep_is_monotone_and_apac_is_conservative() {
    let s = coverage_sweep(&scenario(1), 0.1, 0.05, 40, 300).unwrap();
    assert_eq!(s.tau.len(), 40);
    assert!(s.true_coverage.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    assert!(s.psi_hat.iter().zip(&s.clb).all(|(p, c)| c <= p));
    let (apac, marginal) = (s.apac_tau.unwrap(), s.marginal_tau.unwrap());
    assert!(apac <= marginal);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(survival_curves(&scenario(1), 9.0).is_err());
    assert!(survival_curves(&scenario(7), 1.0).is_err());
    assert!(bound_curve(&scenario(1), 0.5, 1.5, 10).is_err());
    assert!(coverage_sweep(&Scenario { n: 3, ..scenario(1) }, 0.1, 0.05, 10, 10).is_err());
}

#[test]
fn json_wrapper_fills_defaults() {
    let text = survival_curves_js(r#"{"setting": 3, "n": 200}"#, 2.0).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["times"].as_array().is_some_and(|t| !t.is_empty()));
}
