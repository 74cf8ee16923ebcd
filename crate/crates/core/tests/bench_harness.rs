use tcsurv_core::bench::{self, StudyConfig};
use tcsurv_core::calibrate::{Rule, TauGrid};
use tcsurv_core::simgen::SettingSpec;

fn small(id: u32, rule: Rule, reps: usize) -> StudyConfig {
    let mut c = StudyConfig::new(SettingSpec::new(id).unwrap(), 150, reps, rule);
    c.n_mc = 2000;
    c.grid = TauGrid::uniform(40).unwrap();
    c.base_seed = 77;
    c
}

#[test]
fn replications_are_deterministic() {
    let c = small(1, Rule::Apac, 3);
    let a = bench::run_replications(&c).unwrap();
    let b = bench::run_replications(&c).unwrap();
    assert_eq!(a, b);
    let mut serial = c.clone();
    serial.jobs = 1;
    assert_eq!(bench::run_replications(&serial).unwrap(), a);
}

#[test]
fn single_replicate_proportion_is_binary() {
    let r = bench::run_replications(&small(2, Rule::Marginal, 1)).unwrap();
    assert!(r.summary.proportion == 0.0 || r.summary.proportion == 1.0);
    assert!(r.summary.wilson_lo <= r.summary.proportion && r.summary.proportion <= r.summary.wilson_hi);
}

#[test]
fn looser_beta_never_shrinks_the_bound() {
    let tight = small(1, Rule::Apac, 4);
    let mut loose = tight.clone();
    loose.beta = 0.5;
    let a = bench::run_replications(&tight).unwrap();
    let b = bench::run_replications(&loose).unwrap();
    for (x, y) in a.metrics.iter().zip(&b.metrics) {
        assert!(y.average_lpb >= x.average_lpb, "{x:?} vs {y:?}");
    }
}

#[test]
fn ten_covariate_settings_run() {
    for id in [5, 6] {
        let r = bench::run_replications(&small(id, Rule::Marginal, 2)).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        for m in &r.metrics {
            assert!((0.0..=1.0).contains(&m.empirical_coverage));
            assert!(m.average_lpb >= 0.0);
        }
    }
}
