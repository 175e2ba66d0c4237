use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::OrthoCamera;

pub const FACE: &str = "face";
pub const LEFT_EAR: &str = "left_ear";
pub const RIGHT_EAR: &str = "right_ear";
/// Extra attachment layers are named `attachment_1` ..= `attachment_4`.
pub const MAX_ATTACHMENTS: usize = 4;

/// Whether `name` is one of the recognized layer names.
pub fn is_part_name(name: &str) -> bool {
    match name {
        FACE | LEFT_EAR | RIGHT_EAR => true,
        _ => name
            .strip_prefix("attachment_")
            .and_then(|n| n.parse::<usize>().ok())
            .is_some_and(|n| (1..=MAX_ATTACHMENTS).contains(&n)),
    }
}

/// Closed contour per canvas layer, in coarse-canvas pixels (same
/// convention as [`OrthoCamera`] canvas coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSketch {
    pub width: usize,
    pub height: usize,
    pub layers: BTreeMap<String, Vec<[f64; 2]>>,
}

impl PartSketch {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            layers: BTreeMap::new(),
        }
    }

    pub fn with_layer(mut self, name: &str, contour: Vec<[f64; 2]>) -> Self {
        self.layers.insert(name.to_string(), contour);
        self
    }

    pub fn camera(&self) -> OrthoCamera {
        OrthoCamera::front(self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("canvas size must be positive".into()));
        }
        for (name, contour) in &self.layers {
            if !is_part_name(name) {
                return Err(Error::UnknownPart(name.clone()));
            }
            validate_contour(contour).map_err(|reason| Error::Part {
                part: name.clone(),
                reason,
            })?;
        }
        Ok(())
    }
}

/// Circle of canvas radius `r` centered at `(cx, cy)`, closed.
pub fn circle_contour(cx: f64, cy: f64, r: f64, segments: usize) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = (0..segments)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / segments as f64;
            [cx + r * t.cos(), cy + r * t.sin()]
        })
        .collect();
    pts.push(pts[0]);
    pts
}

/// Tolerance for "first point = last point", in pixels.
pub const CLOSE_TOLERANCE: f64 = 1.0;

/// Checks closure and simplicity; returns a human-readable reason.
pub fn validate_contour(c: &[[f64; 2]]) -> std::result::Result<(), String> {
    if c.len() < 4 {
        return Err(format!("contour needs at least 4 points, got {}", c.len()));
    }
    if c.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err("contour has non-finite coordinates".into());
    }
    let (a, b) = (c[0], c[c.len() - 1]);
    if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() > CLOSE_TOLERANCE {
        return Err("contour is not closed".into());
    }
    let poly = ring(c);
    if poly.len() < 3 || signed_area(&poly).abs() < 1e-9 {
        return Err("contour encloses no area".into());
    }
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // Skip segments sharing an endpoint.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return Err(format!("contour self-intersects (segments {i} and {j})"));
            }
        }
    }
    Ok(())
}

/// Contour as an open ring: closing duplicate and repeated points removed.
pub(crate) fn ring(c: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(c.len());
    for &p in c {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 {
        let (a, b) = (out[0], out[out.len() - 1]);
        if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() <= CLOSE_TOLERANCE {
            out.pop();
        } else {
            break;
        }
    }
    out
}

pub(crate) fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let (d1, d2) = (orient(q1, q2, p1), orient(q1, q2, p2));
    let (d3, d4) = (orient(p1, p2, q1), orient(p1, p2, q2));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Signed distance from `p` to the polygon boundary, positive inside.
pub(crate) fn polygon_signed_distance(poly: &[[f64; 2]], p: [f64; 2]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        best = best.min(crate::strokes::segment_distance(p, a, b));
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    if inside {
        best
    } else {
        -best
    }
}

/// Rigid translation plus uniform scale about the part's centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartTransform {
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for PartTransform {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            scale: 1.0,
        }
    }
}

impl PartTransform {
    pub fn translate(x: f64, y: f64, z: f64) -> Self {
        Self {
            translation: [x, y, z],
            scale: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.translation == [0.0; 3] && self.scale == 1.0
    }

    pub fn apply(&self, p: &Point3<f64>, pivot: &Point3<f64>) -> Point3<f64> {
        let t = Vector3::from(self.translation);
        if self.scale == 1.0 {
            return p + t;
        }
        pivot + (p - pivot) * self.scale + t
    }
}

/// Duplicates `source` under `name`, reflected across the x = 0 plane
/// and/or offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartCopy {
    pub source: String,
    pub name: String,
    #[serde(default)]
    pub mirror_x: bool,
    #[serde(default)]
    pub offset: [f64; 3],
}

/// Per-part 3D layout. The face is fixed at the identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartLayout {
    #[serde(default)]
    pub transforms: BTreeMap<String, PartTransform>,
    #[serde(default)]
    pub copies: Vec<PartCopy>,
}

impl PartLayout {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in &self.transforms {
            if !is_part_name(name) {
                return Err(Error::UnknownPart(name.clone()));
            }
            if !(t.scale > 0.0 && t.scale.is_finite()) || t.translation.iter().any(|x| !x.is_finite()) {
                return Err(Error::Part {
                    part: name.clone(),
                    reason: format!("invalid transform (scale {})", t.scale),
                });
            }
            if name == FACE && !t.is_identity() {
                return Err(Error::Part {
                    part: FACE.into(),
                    reason: "the face part is fixed".into(),
                });
            }
        }
        for c in &self.copies {
            if !is_part_name(&c.name) || c.name == FACE {
                return Err(Error::UnknownPart(c.name.clone()));
            }
            if c.offset.iter().any(|x| !x.is_finite()) {
                return Err(Error::Part {
                    part: c.name.clone(),
                    reason: "non-finite offset".into(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_names() {
        assert!(is_part_name("face"));
        assert!(is_part_name("attachment_4"));
        assert!(!is_part_name("attachment_5"));
        assert!(!is_part_name("tail"));
    }

    #[test]
    fn contour_checks() {
        assert!(validate_contour(&circle_contour(50.0, 50.0, 20.0, 32)).is_ok());
        let open = vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
        assert!(validate_contour(&open).unwrap_err().contains("closed"));
        let bowtie = vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 6.0], [0.0, 0.0]];
        assert!(validate_contour(&bowtie).unwrap_err().contains("self-intersects"));
    }

    #[test]
    fn polygon_distance_square() {
        let sq = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        assert!((polygon_signed_distance(&sq, [1.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((polygon_signed_distance(&sq, [3.0, 1.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn face_is_fixed() {
        let mut l = PartLayout::default();
        l.transforms
            .insert("face".into(), PartTransform::translate(0.1, 0.0, 0.0));
        assert!(matches!(l.validate(), Err(Error::Part { .. })));
    }
}
