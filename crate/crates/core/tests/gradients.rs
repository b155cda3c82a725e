use std::time::{Duration, Instant};

use coguide::gradsuite::{run_grad_suite, GradSuiteSpec};
use coguide_autodiff::Tolerance;

#[test]
fn every_component_matches_finite_differences() {
    let start = Instant::now();
    let report = run_grad_suite(&GradSuiteSpec::default(), Tolerance::relative(1e-4)).unwrap();
    let elapsed = start.elapsed();
    assert!(report.passed(), "{report}");
    assert!(elapsed < Duration::from_secs(60), "{elapsed:?}");
    let names: Vec<&str> = report.checks.iter().map(|(n, _)| n.as_str()).collect();
    for want in [
        "encoder",
        "stage1.intent_lstm",
        "stage1.slot_lstm",
        "stage1.heads",
        "stage2.heads",
        "stage2.intent_aware_lstm",
        "stage2.s2i_hgat",
        "stage2.i2s_hgat",
        "objective",
    ] {
        assert!(names.contains(&want), "missing {want}");
    }
}

#[test]
fn objective_check_covers_every_parameter() {
    let spec = GradSuiteSpec::default();
    let report = run_grad_suite(&spec, Tolerance::relative(1e-4)).unwrap();
    let (_, objective) = report.checks.iter().find(|(n, _)| n == "objective").unwrap();
    let (_, store) = coguide::model::CoGuidingNet::init::<f64>(spec.model_config(), spec.seed).unwrap();
    assert_eq!(objective.params.len(), store.len());
}

#[test]
fn impossible_tolerance_fails() {
    let report = run_grad_suite(&GradSuiteSpec::default(), Tolerance { relative: 1e-12, abs_floor: 1e-15 }).unwrap();
    assert!(!report.passed());
    assert!(!report.failures().is_empty());
}
