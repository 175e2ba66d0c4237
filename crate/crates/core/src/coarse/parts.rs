use std::collections::BTreeMap;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sketch::{polygon_signed_distance, ring, PartLayout, PartSketch};
use crate::error::{Error, Result};
use crate::geom::field::field_union;
use crate::geom::{marching_cubes_grid, mesh_to_field, remesh, Aabb, GridField, TriMesh};

/// Coarse-stage parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseParams {
    /// Lattice resolution for part generation and merging.
    pub resolution: usize,
    /// Inflation height factor β.
    pub beta: f64,
    /// Inflation profile exponent (0.5 = square root).
    pub exponent: f64,
    /// Remesh target edge length as a fraction of the bounding-box diagonal.
    pub remesh_edge_fraction: f64,
    pub remesh_iterations: usize,
    /// Laplacian region of interest around profile handles, in rings.
    pub profile_rings: usize,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self {
            resolution: 64,
            beta: 0.8,
            exponent: 0.5,
            remesh_edge_fraction: 0.02,
            remesh_iterations: 4,
            profile_rings: 3,
        }
    }
}

/// Inflates every sketched layer into a closed part mesh.
pub fn generate_parts(sketch: &PartSketch, params: &CoarseParams) -> Result<BTreeMap<String, TriMesh>> {
    sketch.validate()?;
    let names: Vec<&String> = sketch.layers.keys().collect();
    let meshes: Vec<Result<TriMesh>> = names
        .par_iter()
        .map(|name| {
            inflate_contour(&sketch.layers[*name], sketch, params).map_err(|reason| Error::Part {
                part: (*name).clone(),
                reason,
            })
        })
        .collect();
    names
        .into_iter()
        .zip(meshes)
        .map(|(n, m)| Ok((n.clone(), m?)))
        .collect()
}

/// Heightfield solid of one contour sampled on the model-box lattice.
///
/// With s the signed 2D distance to the contour and d = max(s, 0), the solid
/// is |z| ≤ β·d_max·(d/d_max)^e inside the contour; the lattice stores
/// min(s, height − |z|).
pub fn inflation_field(
    contour: &[[f64; 2]],
    sketch: &PartSketch,
    params: &CoarseParams,
) -> std::result::Result<GridField, String> {
    let cam = sketch.camera();
    let poly: Vec<[f64; 2]> = ring(contour)
        .iter()
        .map(|p| {
            let (x, y) = cam.canvas_to_screen(p[0], p[1]);
            [x, y]
        })
        .collect();
    let mut grid = GridField::lattice(params.resolution, Aabb::unit());
    let n = grid.points_per_axis();
    let (origin, h) = (grid.origin, grid.spacing);
    let column: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % n, c / n);
            polygon_signed_distance(&poly, [origin.x + i as f64 * h, origin.y + j as f64 * h])
        })
        .collect();
    let d_max = max_inscribed(&poly, h / 4.0).max(column.iter().cloned().fold(0.0, f64::max));
    if d_max <= 0.0 {
        return Err("contour encloses no lattice area".into());
    }
    let height: Vec<f64> = column
        .iter()
        .map(|&s| params.beta * d_max * (s.max(0.0) / d_max).powf(params.exponent))
        .collect();
    grid.values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
        let z = (origin.z + k as f64 * h).abs();
        for c in 0..n * n {
            slab[c] = column[c].min(height[c] - z);
        }
    });
    close_boundary(&mut grid);
    Ok(grid)
}

fn inflate_contour(
    contour: &[[f64; 2]],
    sketch: &PartSketch,
    params: &CoarseParams,
) -> std::result::Result<TriMesh, String> {
    let mesh = marching_cubes_grid(&inflation_field(contour, sketch, params)?);
    if mesh.is_empty() {
        return Err("contour is too small for the lattice".into());
    }
    Ok(mesh)
}

/// Largest inscribed distance, sampled on a 2D grid of the given step over
/// the polygon's bounding box.
fn max_inscribed(poly: &[[f64; 2]], step: f64) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let nx = ((hi[0] - lo[0]) / step).ceil() as usize + 1;
    let ny = ((hi[1] - lo[1]) / step).ceil() as usize + 1;
    (0..nx * ny)
        .into_par_iter()
        .map(|c| polygon_signed_distance(poly, [lo[0] + (c % nx) as f64 * step, lo[1] + (c / nx) as f64 * step]))
        .reduce(|| 0.0, f64::max)
}

/// Forces the outer lattice layer outside so extraction never leaves holes
/// where a shape touches the box.
fn close_boundary(grid: &mut GridField) {
    let n = grid.points_per_axis();
    let floor = -0.5 * grid.spacing;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                if i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1 {
                    let idx = grid.index(i, j, k);
                    grid.values[idx] = grid.values[idx].min(floor);
                }
            }
        }
    }
}

fn centroid(mesh: &TriMesh) -> Point3<f64> {
    if mesh.vertices.is_empty() {
        return Point3::origin();
    }
    let sum = mesh
        .vertices
        .iter()
        .fold(nalgebra::Vector3::zeros(), |s, p| s + p.coords);
    Point3::from(sum / mesh.vertices.len() as f64)
}

/// Reflection across x = 0 with reversed winding, so normals stay outward.
pub fn mirror_x(mesh: &TriMesh) -> TriMesh {
    let vertices = mesh.vertices.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
    let triangles = mesh.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
    TriMesh::new(vertices, triangles)
}

/// Applies per-part transforms, then the copy operations in order. A copy
/// duplicates the already-transformed source and is itself transformed if
/// the layout names it.
pub fn apply_layout(parts: &BTreeMap<String, TriMesh>, layout: &PartLayout) -> Result<BTreeMap<String, TriMesh>> {
    layout.validate()?;
    let copy_names: Vec<&str> = layout.copies.iter().map(|c| c.name.as_str()).collect();
    for name in layout.transforms.keys() {
        if !parts.contains_key(name) && !copy_names.contains(&name.as_str()) {
            return Err(Error::UnknownPart(name.clone()));
        }
    }
    let transform = |name: &str, mesh: &TriMesh| -> TriMesh {
        match layout.transforms.get(name) {
            Some(t) if !t.is_identity() => {
                let pivot = centroid(mesh);
                mesh.transformed(|p| t.apply(p, &pivot))
            }
            _ => mesh.clone(),
        }
    };
    let mut out: BTreeMap<String, TriMesh> = parts.iter().map(|(n, m)| (n.clone(), transform(n, m))).collect();
    for c in &layout.copies {
        let src = out.get(&c.source).ok_or_else(|| Error::UnknownPart(c.source.clone()))?;
        if out.contains_key(&c.name) {
            return Err(Error::Part {
                part: c.name.clone(),
                reason: "copy target already exists".into(),
            });
        }
        let mut m = if c.mirror_x { mirror_x(src) } else { src.clone() };
        let off = nalgebra::Vector3::from(c.offset);
        if off != nalgebra::Vector3::zeros() {
            m = m.transformed(|p| p + off);
        }
        let m = transform(&c.name, &m);
        out.insert(c.name.clone(), m);
    }
    Ok(out)
}

/// Union of all parts on a common lattice, re-extracted and remeshed.
pub fn merge_parts(parts: &BTreeMap<String, TriMesh>, params: &CoarseParams) -> Result<TriMesh> {
    if parts.is_empty() {
        return Err(Error::InvalidInput("no parts to merge".into()));
    }
    let fields: Vec<Result<GridField>> = parts
        .par_iter()
        .map(|(name, m)| {
            mesh_to_field(m, params.resolution).map_err(|e| Error::Part {
                part: name.clone(),
                reason: e.to_string(),
            })
        })
        .collect();
    let mut union: Option<GridField> = None;
    for f in fields {
        let f = f?;
        union = Some(match union {
            None => f,
            Some(u) => field_union(&u, &f)?,
        });
    }
    let mut union = union.expect("at least one part");
    close_boundary(&mut union);
    let extracted = marching_cubes_grid(&union);
    if extracted.is_empty() {
        return Ok(extracted);
    }
    let target = params.remesh_edge_fraction * extracted.bbox_diagonal();
    Ok(remesh(&extracted, target, params.remesh_iterations))
}

#[cfg(test)]
mod tests {
    use super::super::sketch::{circle_contour, PartTransform, LEFT_EAR};
    use super::*;

    fn face_sketch() -> PartSketch {
        PartSketch::new(128, 128).with_layer("face", circle_contour(64.0, 64.0, 32.0, 96))
    }

    #[test]
    fn circle_inflates_to_spheroid() {
        let params = CoarseParams::default();
        let parts = generate_parts(&face_sketch(), &params).unwrap();
        assert_eq!(parts.len(), 1);
        let m = &parts["face"];
        assert!(m.is_watertight());
        let zmax = m.vertices.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
        let voxel = 2.0 / 64.0;
        assert!((zmax - 0.4).abs() <= voxel, "{zmax}");
    }

    #[test]
    fn ear_on_left_has_negative_centroid() {
        let sketch = face_sketch().with_layer(LEFT_EAR, circle_contour(20.0, 40.0, 10.0, 48));
        let parts = generate_parts(&sketch, &CoarseParams::default()).unwrap();
        assert!(centroid(&parts[LEFT_EAR]).x < 0.0);
    }

    #[test]
    fn layout_translation_and_mirror_copy() {
        let sketch = face_sketch().with_layer(LEFT_EAR, circle_contour(20.0, 40.0, 10.0, 48));
        let parts = generate_parts(&sketch, &CoarseParams::default()).unwrap();
        let mut layout = PartLayout::default();
        layout
            .transforms
            .insert(LEFT_EAR.into(), PartTransform::translate(-0.1, 0.0, 0.0));
        layout.copies.push(super::super::sketch::PartCopy {
            source: LEFT_EAR.into(),
            name: "right_ear".into(),
            mirror_x: true,
            offset: [0.0; 3],
        });
        let out = apply_layout(&parts, &layout).unwrap();
        let (a, b) = (&parts[LEFT_EAR], &out[LEFT_EAR]);
        for (p, q) in a.vertices.iter().zip(&b.vertices) {
            assert_eq!(q.x, p.x - 0.1);
            assert_eq!((q.y, q.z), (p.y, p.z));
        }
        let r = &out["right_ear"];
        for (p, q) in b.vertices.iter().zip(&r.vertices) {
            assert!((q.x + p.x).abs() < 1e-9 && (q.y - p.y).abs() < 1e-9 && (q.z - p.z).abs() < 1e-9);
        }
        assert!(r.volume() > 0.0);
        assert_eq!(out["face"], parts["face"]);
    }

    #[test]
    fn unknown_layout_part() {
        let parts = generate_parts(&face_sketch(), &CoarseParams::default()).unwrap();
        let mut layout = PartLayout::default();
        layout
            .transforms
            .insert(LEFT_EAR.into(), PartTransform::translate(0.1, 0.0, 0.0));
        assert!(matches!(apply_layout(&parts, &layout), Err(Error::UnknownPart(_))));
    }
}
