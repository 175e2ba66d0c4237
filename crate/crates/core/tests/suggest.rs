use std::time::Instant;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sketchface::strokes::Stroke;
use sketchface::suggest::*;

fn query_of(e: &SuggestionEntry) -> SuggestionQuery {
    SuggestionQuery {
        category: e.category,
        style: Some(e.style.clone()),
        contours: e.strokes.iter().map(|s| s.points.clone()).collect(),
        top_n: DEFAULT_TOP_N,
    }
}

#[test]
fn every_corpus_entry_retrieves_itself_first() {
    let idx = SuggestionIndex::builtin();
    assert!(idx.len() >= 30);
    for e in idx.entries() {
        let hits = idx.query(&query_of(e));
        assert_eq!(hits[0].id, e.id);
        assert_eq!(hits[0].distance, 0.0);
        assert_eq!(hits[0].rank, 1);
        // Without the style filter the entry still wins.
        let hits = idx.query(&SuggestionQuery {
            style: None,
            ..query_of(e)
        });
        assert_eq!(hits[0].id, e.id);
    }
}

#[test]
fn placed_strokes_retrieve_their_template() {
    let idx = SuggestionIndex::builtin();
    let target = BBox::new([180.0, 300.0], [332.0, 376.0]);
    for e in idx.entries() {
        let placed = place(&e.strokes, &target).unwrap();
        let q = SuggestionQuery {
            contours: placed.iter().map(|s| s.points.clone()).collect(),
            ..query_of(e)
        };
        let hits = idx.query(&q);
        // Non-uniform scaling changes the aspect ratio, so only require
        // that the template is among the suggestions.
        assert!(hits.iter().any(|h| h.id == e.id), "{}", e.id);
    }
}

fn hand_entry(id: &str, category: Category, desc: Vec<f64>) -> SuggestionEntry {
    SuggestionEntry {
        id: id.into(),
        category,
        style: "toy".into(),
        strokes: vec![Stroke::ridge(vec![[0.0, 0.0], [1.0, 1.0]], 0.5)],
        descriptor: desc,
    }
}

#[test]
fn toy_ranking_matches_hand_sort() {
    // Query [1, 0, 0]: distances √2 (a), 0.2 (b), 1 (c).
    let s = 0.5f64.sqrt();
    let idx = SuggestionIndex::build(vec![
        hand_entry("a", Category::Nose, vec![0.0, 1.0, 0.0]),
        hand_entry("b", Category::Nose, vec![0.98, 0.198997487421324, 0.0]),
        hand_entry("c", Category::Nose, vec![0.5, s, 0.5]),
    ])
    .unwrap();
    let hits = idx.query_descriptor(Category::Nose, None, &[1.0, 0.0, 0.0], 20);
    let ids: Vec<&str> = hits.iter().map(|h| h.id.as_str()).collect();
    assert_eq!(ids, ["b", "c", "a"]);
    assert!((hits[0].distance - 0.2).abs() < 1e-12);
    assert!((hits[1].distance - 1.0).abs() < 1e-12);
    assert!((hits[2].distance - 2f64.sqrt()).abs() < 1e-12);
    assert!(idx
        .query_descriptor(Category::Mouth, None, &[1.0, 0.0, 0.0], 20)
        .is_empty());
}

#[test]
fn category_without_entries_is_empty() {
    let idx = SuggestionIndex::build(vec![hand_entry("a", Category::Eye, vec![1.0])]).unwrap();
    assert!(idx
        .query(&SuggestionQuery::new(Category::Ear, vec![[0.0, 0.0], [1.0, 1.0]]))
        .is_empty());
}

fn random_strokes(rng: &mut StdRng) -> Vec<Stroke> {
    (0..rng.gen_range(1..4))
        .map(|_| {
            let pts = (0..rng.gen_range(2..8))
                .map(|_| [rng.gen::<f64>(), rng.gen::<f64>()])
                .collect();
            Stroke::ridge(pts, rng.gen())
        })
        .collect()
}

#[test]
fn thousand_entry_query_is_fast() {
    let mut rng = StdRng::seed_from_u64(7);
    let records: Vec<EntryRecord> = (0..1000)
        .map(|k| EntryRecord {
            id: format!("e{k:04}"),
            category: Category::Nose,
            style: "random".into(),
            strokes: random_strokes(&mut rng),
        })
        .collect();
    let idx = SuggestionIndex::from_records(records).unwrap();
    let q = SuggestionQuery::new(Category::Nose, vec![[0.0, 0.0], [0.5, 1.0], [1.0, 0.2]]);
    idx.query(&q);
    let start = Instant::now();
    let hits = idx.query(&q);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    assert_eq!(hits.len(), DEFAULT_TOP_N);
    assert!(ms < 50.0, "{ms} ms");
}

#[test]
fn corpus_file_round_trips() {
    let idx = SuggestionIndex::builtin();
    let records: Vec<EntryRecord> = idx.entries().iter().map(SuggestionEntry::record).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.json");
    std::fs::write(&path, serde_json::to_string(&records).unwrap()).unwrap();
    let back = SuggestionIndex::load(&path).unwrap();
    assert_eq!(back.entries(), idx.entries());
}

#[test]
fn out_of_box_corpus_points_are_rejected() {
    let json =
        r#"[{"id":"x","category":"nose","style":"s","strokes":[{"kind":"ridge","a":0.5,"points":[[0,0],[1.5,1]]}]}]"#;
    assert!(SuggestionIndex::from_json(json).is_err());
}

proptest! {
    #[test]
    fn ranking_equals_brute_force(seed in 0u64..1000, n in 1usize..40, top_n in 1usize..25) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cats = [Category::Nose, Category::Eye];
        let records: Vec<EntryRecord> = (0..n)
            .map(|k| EntryRecord {
                id: format!("{k:02}"),
                category: cats[rng.gen_range(0..2)],
                style: "s".into(),
                strokes: random_strokes(&mut rng),
            })
            .collect();
        let idx = SuggestionIndex::from_records(records).unwrap();
        let q = SuggestionQuery { top_n, ..SuggestionQuery::new(Category::Nose, random_strokes(&mut rng).remove(0).points) };
        let qd = descriptor(q.contours.iter().map(Vec::as_slice));
        let mut brute: Vec<(f64, String)> = idx
            .entries()
            .iter()
            .filter(|e| e.category == Category::Nose)
            .map(|e| (e.descriptor.iter().zip(&qd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), e.id.clone()))
            .collect();
        brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        brute.truncate(top_n);
        let got: Vec<(f64, String)> = idx.query(&q).into_iter().map(|h| (h.distance, h.id)).collect();
        prop_assert_eq!(got, brute);
    }

    #[test]
    fn place_then_unplace_round_trips(
        x0 in -500.0..500.0f64, y0 in -500.0..500.0f64,
        w in 0.01..800.0f64, h in 0.01..800.0f64,
        pts in prop::collection::vec([0.0..1.0f64, 0.0..1.0f64], 2..20),
    ) {
        let strokes = vec![Stroke::valley(pts, 0.4)];
        let b = BBox::new([x0, y0], [x0 + w, y0 + h]);
        let back = unplace(&place(&strokes, &b).unwrap(), &b).unwrap();
        for (p, q) in strokes[0].points.iter().zip(&back[0].points) {
            prop_assert!((p[0] - q[0]).abs() <= 1e-9 && (p[1] - q[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn descriptors_have_unit_norm(pts in prop::collection::vec([-5.0..5.0f64, -5.0..5.0f64], 1..20)) {
        let d = descriptor([pts.as_slice()]);
        prop_assert!((d.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
