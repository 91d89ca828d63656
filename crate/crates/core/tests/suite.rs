//! The default property suite end to end.

use rmdp_geometry::harness::{replay, run_suite, CheckId, SuiteConfig, SuiteReport};

#[test]
fn default_suite_passes_every_check() {
    let report = run_suite(&SuiteConfig::default()).unwrap();
    let failing: Vec<_> = report
        .checks
        .iter()
        .filter(|c| c.failures > 0)
        .map(|c| c.check.name())
        .collect();
    assert!(report.all_passed, "{failing:?}");
    assert_eq!(report.checks.len(), CheckId::ALL.len());
    assert!(report
        .checks
        .iter()
        .all(|c| c.trials > 0 && c.passes == c.trials));
    assert!(report.failures.is_empty());
}

#[test]
fn report_round_trips_and_failures_replay() {
    let cfg = SuiteConfig {
        num_instances: 5,
        inject_failure: Some(CheckId::RobustBellmanContraction),
        ..SuiteConfig::default()
    };
    let report = run_suite(&cfg).unwrap();
    assert!(!report.all_passed);
    let text = serde_json::to_string(&report).unwrap();
    let back: SuiteReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    for f in &back.failures {
        let again = replay(&back.config, f).unwrap();
        assert_eq!(again.to_bits(), f.metric.to_bits());
    }
}
