use std::path::PathBuf;

use dswig_core::fixtures::run_all;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn every_fixture_verdict_matches() {
    let reports = run_all(&root()).unwrap();
    assert!(reports.len() >= 10, "found {} fixtures", reports.len());
    let mut failures = Vec::new();
    for r in &reports {
        for o in r.failures() {
            failures.push(format!("{} / {}: {} [{}] {}", r.fixture, o.case, o.check, o.cite, o.detail.as_deref().unwrap_or("")));
        }
    }
    assert!(failures.is_empty(), "fixture mismatches:\n{}", failures.join("\n"));
}
