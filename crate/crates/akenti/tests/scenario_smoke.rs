//! End-to-end scenario runs against a generated corpus.

use akenti::scenario;

#[test]
fn generated_corpus_passes_the_scripted_scenario() {
    let dir = tempfile::tempdir().unwrap();
    scenario::generate(dir.path()).unwrap();
    let report = scenario::run(dir.path()).unwrap();
    assert!(report.all_passed(), "\n{}", report.render());
}

#[test]
fn deleting_the_production_use_condition_fails_the_client_step_as_deny() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = scenario::generate(dir.path()).unwrap();
    std::fs::remove_file(fixture.certs_dir().join("uc-production.xml")).unwrap();
    let report = scenario::run(dir.path()).unwrap();
    assert!(!report.all_passed());
    let step = report
        .steps
        .iter()
        .find(|s| s.name == "mary starts production code")
        .unwrap();
    assert!(!step.pass);
    assert_eq!(step.expected, scenario::Expectation::Allowed);
    assert!(step.actual.starts_with("DENIED"), "{}", step.actual);
}

#[test]
fn empty_directory_is_missing_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let err = scenario::run(dir.path()).unwrap_err();
    assert!(matches!(err, scenario::ScenarioError::MissingFixture(_)));
}
