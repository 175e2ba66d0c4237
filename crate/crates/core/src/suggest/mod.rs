//! Stroke suggestions: a descriptor index over a corpus of stroke templates,
//! ranked retrieval by category and style, and placement onto the canvas.

mod descriptor;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::strokes::Stroke;

pub use descriptor::{descriptor, normalize_polylines, DESCRIPTOR_SIZE};

pub const DEFAULT_TOP_N: usize = 20;

/// Slack allowed on corpus coordinates outside the unit box.
const UNIT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Nose,
    Eye,
    Mouth,
    Ear,
    Wrinkle,
    Other,
}

/// Corpus record as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub id: String,
    pub category: Category,
    pub style: String,
    pub strokes: Vec<Stroke>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionEntry {
    pub id: String,
    pub category: Category,
    pub style: String,
    /// Polylines in the unit box.
    pub strokes: Vec<Stroke>,
    /// Unit-norm flattened raster, see [`descriptor`].
    pub descriptor: Vec<f64>,
}

impl SuggestionEntry {
    pub fn new(record: EntryRecord) -> Result<Self> {
        if record.strokes.is_empty() {
            return Err(Error::InvalidInput(format!(
                "suggestion `{}` has no strokes",
                record.id
            )));
        }
        for s in &record.strokes {
            s.validate()
                .map_err(|e| Error::InvalidInput(format!("suggestion `{}`: {e}", record.id)))?;
            if s.points
                .iter()
                .flatten()
                .any(|c| !(-UNIT_SLACK..=1.0 + UNIT_SLACK).contains(c))
            {
                return Err(Error::InvalidInput(format!(
                    "suggestion `{}` has points outside the unit box",
                    record.id
                )));
            }
        }
        let descriptor = descriptor(record.strokes.iter().map(|s| s.points.as_slice()));
        Ok(Self {
            id: record.id,
            category: record.category,
            style: record.style,
            strokes: record.strokes,
            descriptor,
        })
    }

    pub fn record(&self) -> EntryRecord {
        EntryRecord {
            id: self.id.clone(),
            category: self.category,
            style: self.style.clone(),
            strokes: self.strokes.clone(),
        }
    }
}

/// Exact nearest-neighbour index (linear scan).
#[derive(Debug, Clone, Default)]
pub struct SuggestionIndex {
    entries: Vec<SuggestionEntry>,
}

impl SuggestionIndex {
    pub fn build(entries: Vec<SuggestionEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_records(records: Vec<EntryRecord>) -> Result<Self> {
        Self::build(records.into_iter().map(SuggestionEntry::new).collect::<Result<_>>()?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_records(serde_json::from_str(json)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The corpus bundled with the library.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CORPUS).expect("bundled corpus is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SuggestionEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&SuggestionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn query(&self, q: &SuggestionQuery) -> Vec<Suggestion> {
        let polylines: Vec<&[[f64; 2]]> = q.contours.iter().filter(|c| !c.is_empty()).map(Vec::as_slice).collect();
        if polylines.is_empty() {
            return Vec::new();
        }
        self.query_descriptor(q.category, q.style.as_deref(), &descriptor(polylines), q.top_n)
    }

    /// Ranks matching entries by L2 distance to `desc`; ties go to the
    /// smaller id.
    pub fn query_descriptor(
        &self,
        category: Category,
        style: Option<&str>,
        desc: &[f64],
        top_n: usize,
    ) -> Vec<Suggestion> {
        let mut hits: Vec<(f64, &SuggestionEntry)> = self
            .entries
            .iter()
            .filter(|e| e.category == category && style.is_none_or(|s| e.style.eq_ignore_ascii_case(s.trim())))
            .map(|e| (l2(&e.descriptor, desc), e))
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        hits.truncate(top_n);
        hits.into_iter()
            .enumerate()
            .map(|(rank, (distance, e))| Suggestion {
                rank: rank + 1,
                id: e.id.clone(),
                category: e.category,
                style: e.style.clone(),
                distance,
                strokes: e.strokes.clone(),
            })
            .collect()
    }

    /// Distinct styles of a category, sorted.
    pub fn styles(&self, category: Category) -> Vec<String> {
        let mut s: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.category == category)
            .map(|e| e.style.clone())
            .collect();
        s.sort();
        s.dedup();
        s
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn default_top_n() -> usize {
    DEFAULT_TOP_N
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionQuery {
    pub category: Category,
    #[serde(default)]
    pub style: Option<String>,
    /// Query gesture in any coordinate frame; usually one polyline.
    pub contours: Vec<Vec<[f64; 2]>>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
}

impl SuggestionQuery {
    pub fn new(category: Category, contour: Vec<[f64; 2]>) -> Self {
        Self {
            category,
            style: None,
            contours: vec![contour],
            top_n: DEFAULT_TOP_N,
        }
    }

    pub fn with_style(mut self, style: impl Into<String>) -> Self {
        self.style = Some(style.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub rank: usize,
    pub id: String,
    pub category: Category,
    pub style: String,
    pub distance: f64,
    /// Unit-box strokes, ready for [`place`].
    pub strokes: Vec<Stroke>,
}

/// Axis-aligned canvas rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub const UNIT: BBox = BBox {
        min: [0.0, 0.0],
        max: [1.0, 1.0],
    };

    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn size(&self) -> [f64; 2] {
        [self.max[0] - self.min[0], self.max[1] - self.min[1]]
    }

    fn check(&self) -> Result<()> {
        let [w, h] = self.size();
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidInput(format!("degenerate placement box {w} x {h}")));
        }
        Ok(())
    }
}

/// Maps unit-box strokes into `target`. Kinds, depths and widths are kept.
pub fn place(strokes: &[Stroke], target: &BBox) -> Result<Vec<Stroke>> {
    target.check()?;
    let [w, h] = target.size();
    Ok(map_points(strokes, |[x, y]| {
        [target.min[0] + x * w, target.min[1] + y * h]
    }))
}

/// Inverse of [`place`].
pub fn unplace(strokes: &[Stroke], source: &BBox) -> Result<Vec<Stroke>> {
    source.check()?;
    let [w, h] = source.size();
    Ok(map_points(strokes, |[x, y]| {
        [(x - source.min[0]) / w, (y - source.min[1]) / h]
    }))
}

fn map_points(strokes: &[Stroke], f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<Stroke> {
    strokes
        .iter()
        .map(|s| Stroke {
            points: s.points.iter().map(|&p| f(p)).collect(),
            ..s.clone()
        })
        .collect()
}

const BUILTIN_CORPUS: &str = include_str!("../../data/suggestions.json");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strokes::StrokeKind;

    fn record(id: &str, category: Category, style: &str, pts: Vec<[f64; 2]>) -> EntryRecord {
        EntryRecord {
            id: id.into(),
            category,
            style: style.into(),
            strokes: vec![Stroke::ridge(pts, 0.5)],
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let r = record("a", Category::Nose, "human", vec![[0.0, 0.0], [1.0, 1.0]]);
        let err = SuggestionIndex::from_records(vec![r.clone(), r]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn empty_index_answers_nothing() {
        let idx = SuggestionIndex::build(vec![]).unwrap();
        assert!(idx
            .query(&SuggestionQuery::new(Category::Eye, vec![[0.0, 0.0], [1.0, 0.0]]))
            .is_empty());
    }

    #[test]
    fn empty_stroke_set_is_rejected() {
        let r = EntryRecord {
            id: "x".into(),
            category: Category::Other,
            style: "s".into(),
            strokes: vec![],
        };
        assert!(SuggestionEntry::new(r).is_err());
    }

    #[test]
    fn style_filter_ignores_case() {
        let idx = SuggestionIndex::from_records(vec![
            record("a", Category::Nose, "Pig", vec![[0.0, 0.5], [1.0, 0.5]]),
            record("b", Category::Nose, "human", vec![[0.0, 0.5], [1.0, 0.5]]),
        ])
        .unwrap();
        let hits = idx.query(&SuggestionQuery::new(Category::Nose, vec![[0.0, 0.0], [1.0, 0.0]]).with_style("pig"));
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id, "a");
    }

    #[test]
    fn equal_distances_rank_by_id() {
        let pts = vec![[0.0, 0.5], [1.0, 0.5]];
        let idx = SuggestionIndex::from_records(vec![
            record("b", Category::Eye, "x", pts.clone()),
            record("a", Category::Eye, "x", pts.clone()),
        ])
        .unwrap();
        let ids: Vec<_> = idx
            .query(&SuggestionQuery::new(Category::Eye, pts))
            .into_iter()
            .map(|s| s.id)
            .collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn place_scales_and_translates() {
        let s = vec![Stroke::new(StrokeKind::Valley, vec![[0.0, 0.0], [0.5, 1.0]], 0.3).with_width(2.0)];
        assert_eq!(place(&s, &BBox::UNIT).unwrap(), s);
        let doubled = place(&s, &BBox::new([0.0, 0.0], [2.0, 2.0])).unwrap();
        assert_eq!(doubled[0].points, vec![[0.0, 0.0], [1.0, 2.0]]);
        let moved = place(&s, &BBox::new([10.0, 20.0], [11.0, 21.0])).unwrap();
        assert_eq!(moved[0].points, vec![[10.0, 20.0], [10.5, 21.0]]);
        assert_eq!(
            (moved[0].kind, moved[0].a, moved[0].width),
            (StrokeKind::Valley, 0.3, 2.0)
        );
        assert!(place(&s, &BBox::new([1.0, 1.0], [1.0, 5.0])).is_err());
    }

    #[test]
    fn builtin_corpus_loads() {
        let idx = SuggestionIndex::builtin();
        for c in [
            Category::Nose,
            Category::Eye,
            Category::Mouth,
            Category::Ear,
            Category::Wrinkle,
            Category::Other,
        ] {
            assert!(!idx.styles(c).is_empty(), "{c:?}");
        }
    }
}
