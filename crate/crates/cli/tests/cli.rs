use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use sketchface::coarse::{circle_contour, PartSketch, FACE};
use sketchface::session::{demo_project, import_obj};
use sketchface::suggest::{SuggestionIndex, SuggestionQuery};

fn sketchface(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchface"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_twice_writes_identical_obj() {
    let dir = tempfile::tempdir().unwrap();
    let project = dir.path().join("p.json");
    demo_project().unwrap().save(&project).unwrap();
    let (a, b) = (dir.path().join("a.obj"), dir.path().join("b.obj"));
    for out in [&a, &b] {
        let o = sketchface(&["pipeline", "--project", arg(&project), "--out", arg(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn verify_passes_on_a_clean_build() {
    let o = sketchface(&["verify"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn verify_json_lists_checks() {
    let o = sketchface(&["--json", "verify", "--filter", "strokes/"]);
    assert!(o.status.success());
    let v = json_out(&o);
    assert_eq!(v["failed"], 0);
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn coarse_writes_a_closed_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let sketch = dir.path().join("s.json");
    let doc = PartSketch::new(512, 512).with_layer(FACE, circle_contour(256.0, 256.0, 120.0, 96));
    std::fs::write(&sketch, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = dir.path().join("m.obj");
    let o = sketchface(&["--json", "coarse", "--sketch", arg(&sketch), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json_out(&o)["mesh"]["watertight"], true);
    assert!(import_obj(&out).unwrap().is_watertight());
}

#[test]
fn refine_fills_the_debug_dir() {
    let dir = tempfile::tempdir().unwrap();
    let project = dir.path().join("p.json");
    demo_project().unwrap().save(&project).unwrap();
    let debug = dir.path().join("debug");
    let out = dir.path().join("f.obj");
    let o = sketchface(&[
        "--json",
        "refine",
        "--project",
        arg(&project),
        "--out",
        arg(&out),
        "--debug-dir",
        arg(&debug),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v = json_out(&o);
    assert!(v["diagnostics"]["vertices_out"].as_u64().unwrap() > 0);
    assert!(std::fs::read_dir(&debug).unwrap().count() > 3);
}

#[test]
fn errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dir.path().join("x.obj");
    let o = sketchface(&["--json", "pipeline", "--project", arg(&missing), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json_out(&o)["error"], "io");

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"version\": 1, \"events\": [").unwrap();
    let o = sketchface(&["--json", "pipeline", "--project", arg(&broken), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let v = json_out(&o);
    assert_eq!(v["error"], "parse");
    assert!(v["message"].as_str().unwrap().contains("line 1"));

    let future = dir.path().join("future.json");
    std::fs::write(&future, "{\"version\": 99}").unwrap();
    let o = sketchface(&["--json", "refine", "--project", arg(&future), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json_out(&o)["error"], "unsupported_version");
    assert!(!out.exists());
}

#[test]
fn suggest_index_ranks_the_drawn_entry_first() {
    let dir = tempfile::tempdir().unwrap();
    let index = SuggestionIndex::builtin();
    let e = &index.entries()[0];
    let q = SuggestionQuery {
        category: e.category,
        style: Some(e.style.clone()),
        contours: e.strokes.iter().map(|s| s.points.clone()).collect(),
        top_n: 5,
    };
    let query = dir.path().join("q.json");
    std::fs::write(&query, serde_json::to_string(&q).unwrap()).unwrap();
    let o = sketchface(&["suggest-index", "--query", arg(&query)]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with(&format!("1 {} ", e.id)), "{first}");

    let corpus = dir.path().join("c.json");
    std::fs::write(&corpus, "[]").unwrap();
    let o = sketchface(&[
        "--json",
        "suggest-index",
        "--corpus",
        arg(&corpus),
        "--query",
        arg(&query),
    ]);
    assert!(o.status.success());
    assert_eq!(json_out(&o)["suggestions"].as_array().unwrap().len(), 0);
}

#[test]
fn bench_reports_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let o = sketchface(&[
        "bench",
        "mc-vs-idgmm",
        "--field",
        "ellipsoid",
        "--grid",
        "48",
        "--csv",
        arg(&csv),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("speedup"));
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut rows = csv::Reader::from_reader(table.as_bytes());
    let methods: Vec<String> = rows.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(methods, ["mc", "idgmm"]);

    let o = sketchface(&["bench", "mc-vs-idgmm", "--field", "file"]);
    assert!(!o.status.success());
}
