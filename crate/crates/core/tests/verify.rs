use sketchface::verify::{check_names, run};

#[test]
fn every_check_passes_on_a_clean_build() {
    let results = run(None);
    assert_eq!(results.len(), check_names().len());
    for c in &results {
        assert!(c.passed, "{}/{}: {}", c.module, c.name, c.detail);
    }
}

#[test]
fn every_module_is_covered() {
    let names = check_names();
    for m in [
        "geomcore", "imageops", "strokes", "coarse", "idgmm", "suggest", "session",
    ] {
        assert!(names.iter().any(|n| n.starts_with(&format!("{m}/"))), "{m}");
    }
}

#[test]
fn unknown_filter_runs_nothing() {
    assert!(run(Some("no-such-check")).is_empty());
}
