//! Quick invariant checks over every module, run by `sketchface verify`.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::coarse::{build_coarse, circle_contour, CoarseParams, PartLayout, PartSketch, FACE};
use crate::geom::field::{field_union, SphereField};
use crate::geom::mesh::{cuboid, icosphere, tetrahedron};
use crate::geom::{
    k_ring, laplacian_deform, marching_cubes, mesh_to_field, remesh, subdivide_region, Aabb, GridField, TriMesh,
};
use crate::idgmm::{field_normals, idw_refine, implicit_update_along, stroke_preview, IdwParams, ProviderBundle};
use crate::raster::{estimate_flow, normal_from_depth, render_depth, DepthMap, OrthoCamera, PointCloud};
use crate::session::{demo_project, Project};
use crate::strokes::{decode_pixel, encode_strokes, stroke_displacement_field, Stroke};
use crate::suggest::SuggestionIndex;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub ms: f64,
}

type Outcome = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

type CheckFn = fn() -> Outcome;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("geomcore", "sphere_extraction", sphere_extraction),
    ("geomcore", "cube_field_center", cube_field_center),
    ("geomcore", "union_idempotent", union_idempotent),
    (
        "geomcore",
        "remesh_and_subdivide_stay_closed",
        remesh_and_subdivide_stay_closed,
    ),
    ("geomcore", "laplacian_fixed_point", laplacian_fixed_point),
    ("imageops", "sphere_depth_and_normals", sphere_depth_and_normals),
    (
        "imageops",
        "identical_maps_have_zero_flow",
        identical_maps_have_zero_flow,
    ),
    ("strokes", "color_code_round_trip", color_code_round_trip),
    ("strokes", "displacement_sign", displacement_sign),
    ("coarse", "circle_is_watertight", circle_is_watertight),
    ("idgmm", "analytic_sphere_one_step", analytic_sphere_one_step),
    ("idgmm", "idw_brute_force", idw_brute_force),
    ("idgmm", "preview_is_deterministic", preview_is_deterministic),
    ("suggest", "self_retrieval", self_retrieval),
    ("session", "project_round_trip", project_round_trip),
    ("session", "replay_is_deterministic", replay_is_deterministic),
];

/// Names of all checks as `module/name`.
pub fn check_names() -> Vec<String> {
    CHECKS.iter().map(|(m, n, _)| format!("{m}/{n}")).collect()
}

/// Runs every check, or those whose `module/name` contains `filter`.
pub fn run(filter: Option<&str>) -> Vec<Check> {
    CHECKS
        .iter()
        .filter(|(m, n, _)| filter.is_none_or(|f| format!("{m}/{n}").contains(f)))
        .map(|&(module, name, f)| {
            let start = Instant::now();
            let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let (passed, detail) = match out {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            Check {
                module,
                name,
                passed,
                detail,
                ms,
            }
        })
        .collect()
}

fn sphere_extraction() -> Outcome {
    let f = SphereField::new(Point3::origin(), 0.5);
    let m = marching_cubes(&f, 64, Aabb::unit());
    let voxel = 2.0 / 64.0;
    let residual = m
        .vertices
        .iter()
        .map(|v| (v.coords.norm() - 0.5).abs())
        .fold(0.0, f64::max);
    let exact = 4.0 * std::f64::consts::PI * 0.25;
    let area = (m.area() - exact).abs() / exact;
    ensure(
        m.is_watertight() && residual <= 1.5 * voxel && area <= 0.05,
        format!(
            "residual {:.3} voxels, area error {:.2}%",
            residual / voxel,
            area * 100.0
        ),
    )
}

fn cube_field_center() -> Outcome {
    let g = mesh_to_field(&cuboid(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5)), 64)
        .map_err(|e| e.to_string())?;
    let c = crate::geom::ScalarField::sample(&g, &Point3::origin());
    ensure(
        (c - 0.5).abs() <= g.spacing && g.at(0, 0, 0) < 0.0,
        format!("center {c:.4}"),
    )
}

fn union_idempotent() -> Outcome {
    let g = GridField::from_field(&SphereField::new(Point3::new(0.1, 0.0, 0.0), 0.4), 32, Aabb::unit());
    let u = field_union(&g, &g).map_err(|e| e.to_string())?;
    ensure(u.values == g.values, "union(f, f) = f".into())
}

fn remesh_and_subdivide_stay_closed() -> Outcome {
    let m = icosphere(0.6, 3);
    let r = remesh(&m, 0.08, 4);
    let s = subdivide_region(&m, &[0, 5, 17]).map_err(|e| e.to_string())?.mesh;
    let t = subdivide_region(&tetrahedron(), &[0]).map_err(|e| e.to_string())?.mesh;
    ensure(
        r.is_watertight() && s.is_watertight() && t.triangles.len() == 10,
        format!(
            "remeshed {} triangles, boundary edges {} / {}",
            r.triangles.len(),
            r.boundary_edge_count(),
            s.boundary_edge_count()
        ),
    )
}

fn laplacian_fixed_point() -> Outcome {
    let m = icosphere(1.0, 3);
    let roi = k_ring(&m, &[3], 2);
    let handles: BTreeMap<usize, Point3<f64>> = [(3, m.vertices[3])].into();
    let out = laplacian_deform(&m, &handles, &roi).map_err(|e| e.to_string())?;
    let worst = out
        .vertices
        .iter()
        .zip(&m.vertices)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, format!("max move {worst:.2e}"))
}

fn sphere_depth_and_normals() -> Outcome {
    let m = marching_cubes(&SphereField::new(Point3::origin(), 0.5), 64, Aabb::unit());
    let cam = OrthoCamera::front(128, 128);
    let d = render_depth(&m, &cam);
    let center = d.get(64, 64).ok_or("center pixel empty")?;
    let n = normal_from_depth(&d, &cam);
    let unit = n
        .normals
        .iter()
        .zip(&n.valid)
        .filter(|(_, &v)| v)
        .all(|(v, _)| (v.norm() - 1.0).abs() <= 1e-6);
    ensure(
        (center - 0.5).abs() <= 0.02 && unit,
        format!("center depth {center:.4}"),
    )
}

fn identical_maps_have_zero_flow() -> Outcome {
    let d = DepthMap::from_fn(64, 64, |i, j| {
        let (x, y) = (i as f64 - 32.0, j as f64 - 32.0);
        (x * x + y * y < 600.0).then(|| 0.3 + 0.1 * (-(x * x + y * y) / 200.0).exp())
    });
    let est = estimate_flow(&d, &d).map_err(|e| e.to_string())?;
    let worst = est.flow.flow.iter().map(|f| f[0].hypot(f[1])).fold(0.0, f64::max);
    ensure(worst <= 1e-9, format!("max flow {worst:.2e} px"))
}

fn color_code_round_trip() -> Outcome {
    for k in 0..=20 {
        let a = k as f64 / 20.0;
        for s in [
            Stroke::ridge(vec![[10.0, 10.0], [50.0, 10.0]], a),
            Stroke::valley(vec![[10.0, 10.0], [50.0, 10.0]], a),
        ] {
            let img = encode_strokes(std::slice::from_ref(&s), 64, 32);
            let (kind, ahat) = decode_pixel(img.get(30, 10)).ok_or(format!("a = {a}: pixel not encoded"))?;
            if kind != s.kind || (ahat - a).abs() > 1.0 / 254.0 {
                return Err(format!("a = {a}: decoded {kind:?} {ahat}"));
            }
        }
    }
    Ok("21 levels × ridge/valley".into())
}

fn displacement_sign() -> Outcome {
    let line = vec![[20.0, 32.0], [44.0, 32.0]];
    let up = stroke_displacement_field(&[Stroke::ridge(line.clone(), 1.0)], 64, 64, 0.06);
    let down = stroke_displacement_field(&[Stroke::valley(line, 1.0)], 64, 64, 0.06);
    let (u, d) = (up.get(32, 32), down.get(32, 32));
    ensure(
        u > 0.0 && (u + d).abs() <= 1e-12 && up.get(2, 2) == 0.0,
        format!("centerline {u:.4} / {d:.4}"),
    )
}

fn circle_is_watertight() -> Outcome {
    let sketch = PartSketch::new(512, 512).with_layer(FACE, circle_contour(256.0, 256.0, 128.0, 96));
    let m = build_coarse(&sketch, &PartLayout::default(), &CoarseParams::default()).map_err(|e| e.to_string())?;
    ensure(
        m.is_watertight() && m.connected_components() == 1,
        format!("{} vertices, {} components", m.vertices.len(), m.connected_components()),
    )
}

fn analytic_sphere_one_step() -> Outcome {
    let m = icosphere(1.2, 4);
    let field = SphereField::new(Point3::origin(), 1.0);
    let normals = field_normals(&m, &field);
    let (out, _) = implicit_update_along(&m, &field, 2.0, &normals);
    let worst = out
        .vertices
        .iter()
        .map(|v| (v.coords.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6, format!("max residual {worst:.2e}"))
}

/// All-pairs reference for [`idw_refine`].
fn brute_force_idw(v: &Point3<f64>, cloud: &[Point3<f64>], p: &IdwParams) -> Point3<f64> {
    let mut d: Vec<(f64, usize)> = cloud.iter().enumerate().map(|(i, q)| ((v - q).norm(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if d[0].0 > p.radius {
        return *v;
    }
    d.truncate(p.neighbors);
    if d[0].0 < p.epsilon {
        return cloud[d[0].1];
    }
    let (mut acc, mut total) = (Vector3::zeros(), 0.0);
    for (di, i) in d {
        let w = di.powf(-p.power);
        acc += cloud[i].coords * w;
        total += w;
    }
    Point3::from(acc / total)
}

fn idw_brute_force() -> Outcome {
    let p = IdwParams {
        neighbors: 8,
        power: 2.0,
        epsilon: 1e-7,
        radius: 0.5,
    };
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut pt = || {
            Point3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            )
        };
        let cloud: Vec<Point3<f64>> = (0..100).map(|_| pt()).collect();
        let verts: Vec<Point3<f64>> = (0..100).map(|_| pt()).collect();
        let out = idw_refine(
            &TriMesh::new(verts.clone(), vec![]),
            &PointCloud {
                points: cloud.clone(),
                normals: None,
            },
            &p,
        );
        for (a, v) in out.vertices.iter().zip(&verts) {
            worst = worst.max((a - brute_force_idw(v, &cloud, &p)).norm());
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn preview_is_deterministic() -> Outcome {
    let m = icosphere(0.6, 4);
    let cam = OrthoCamera::front(128, 128);
    let d = render_depth(&m, &cam);
    let strokes = [Stroke::ridge(vec![[40.0, 60.0], [88.0, 60.0]], 0.8)];
    let a = stroke_preview(&d, &strokes, &cam, 0.06)
        .to_png_bytes()
        .map_err(|e| e.to_string())?;
    let b = stroke_preview(&d, &strokes, &cam, 0.06)
        .to_png_bytes()
        .map_err(|e| e.to_string())?;
    ensure(a == b, format!("{} bytes", a.len()))
}

fn self_retrieval() -> Outcome {
    let index = SuggestionIndex::builtin();
    for e in index.entries() {
        let hits = index.query_descriptor(e.category, Some(&e.style), &e.descriptor, 1);
        match hits.first() {
            Some(h) if h.id == e.id && h.distance == 0.0 => {}
            other => return Err(format!("{}: got {:?}", e.id, other.map(|h| &h.id))),
        }
    }
    Ok(format!("{} entries", index.len()))
}

fn project_round_trip() -> Outcome {
    let p = demo_project().map_err(|e| e.to_string())?;
    let back = Project::from_json(&p.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(back == p, format!("{} events", p.events.len()))
}

fn replay_is_deterministic() -> Outcome {
    let p = demo_project().map_err(|e| e.to_string())?;
    let providers = ProviderBundle::procedural();
    let a = p.replay(&providers).map_err(|e| e.to_string())?;
    let b = p.replay(&providers).map_err(|e| e.to_string())?;
    let (oa, ob) = (
        a.fine.to_obj_string().map_err(|e| e.to_string())?,
        b.fine.to_obj_string().map_err(|e| e.to_string())?,
    );
    ensure(oa == ob && a.fine.is_watertight(), format!("{} bytes", oa.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }

    #[test]
    fn filter_selects_a_module() {
        let out = run(Some("strokes/"));
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|c| c.passed && c.module == "strokes"), "{out:?}");
    }
}
