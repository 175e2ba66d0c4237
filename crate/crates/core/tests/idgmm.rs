use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sketchface::coarse::*;
use sketchface::geom::field::SphereField;
use sketchface::geom::mesh::icosphere;
use sketchface::geom::{subdivide_region, TriMesh};
use sketchface::idgmm::*;
use sketchface::metrics::{chamfer, hausdorff};
use sketchface::raster::{normal_from_depth, render_depth, DepthMap, NormalMap, OrthoCamera, PointCloud};
use sketchface::strokes::{stroke_displacement_field, SketchImage, Stroke};

const A: f64 = 0.06;
const VOXEL: f64 = 2.0 / 128.0;

fn face() -> TriMesh {
    let params = CoarseParams::default();
    let sketch = PartSketch::new(512, 512).with_layer(FACE, circle_contour(256.0, 256.0, 128.0, 128));
    merge_parts(&generate_parts(&sketch, &params).unwrap(), &params).unwrap()
}

fn forehead() -> Vec<[f64; 2]> {
    vec![[200.0, 190.0], [312.0, 190.0]]
}

fn front() -> OrthoCamera {
    OrthoCamera::front(512, 512)
}

/// Pixels whose 9×9 neighborhood is entirely valid.
fn interior(d: &DepthMap, k: usize) -> bool {
    let (i, j) = (k % d.width, k / d.width);
    (i.saturating_sub(4)..(i + 5).min(d.width))
        .all(|ii| (j.saturating_sub(4)..(j + 5).min(d.height)).all(|jj| d.valid[jj * d.width + ii]))
}

#[test]
fn ridge_raises_and_valley_lowers_the_centerline() {
    let m = face();
    let before = render_depth(&m, &front());
    let cfg = RefineConfig::default();
    for (stroke, sign) in [
        (Stroke::ridge(forehead(), 1.0), 1.0),
        (Stroke::valley(forehead(), 1.0), -1.0),
    ] {
        let out = refine(&m, std::slice::from_ref(&stroke), &ProviderBundle::procedural(), &cfg).unwrap();
        assert!(out.mesh.is_watertight());
        let after = render_depth(&out.mesh, &front());
        // Pixel rows 189 and 190 straddle the polyline at y = 190.
        for j in [189, 190] {
            for i in 215..=297 {
                let rise = sign * (after.get(i, j).unwrap() - before.get(i, j).unwrap());
                assert!((0.3 * A..=A).contains(&rise), "({i}, {j}) moved {rise}");
            }
        }

        let support = stroke_displacement_field(&[stroke], 512, 512, A).dilated_support(8);
        for (k, &inside) in support.iter().enumerate() {
            if inside || !interior(&before, k) || !after.valid[k] {
                continue;
            }
            let d = (after.depth[k] - before.depth[k]).abs();
            assert!(d <= 0.02 * A, "pixel {k} outside the stroke moved {d}");
        }
    }
}

#[test]
fn empty_strokes_leave_the_mesh() {
    let m = face();
    let out = refine(&m, &[], &ProviderBundle::procedural(), &RefineConfig::default()).unwrap();
    assert!(hausdorff(&out.mesh, &m) <= VOXEL);
    assert_eq!(out.diagnostics.idw_moved, 0);
}

#[test]
fn second_pass_with_the_same_strokes_barely_moves() {
    let m = face();
    let strokes = [Stroke::ridge(forehead(), 0.4)];
    let cfg = RefineConfig::default();
    let once = refine(&m, &strokes, &ProviderBundle::procedural(), &cfg).unwrap().mesh;
    let twice = refine(&once, &strokes, &ProviderBundle::procedural(), &cfg)
        .unwrap()
        .mesh;
    let h = hausdorff(&once, &twice);
    assert!(h <= 0.5 * VOXEL, "hausdorff {h}");
}

#[test]
fn refine_is_deterministic() {
    let m = face();
    let strokes = [
        Stroke::ridge(vec![[190.0, 230.0], [250.0, 200.0], [320.0, 240.0]], 0.7),
        Stroke::valley(vec![[220.0, 330.0], [292.0, 330.0]], 0.5),
    ];
    let cfg = RefineConfig::default();
    let a = refine(&m, &strokes, &ProviderBundle::procedural(), &cfg).unwrap();
    let b = refine(&m, &strokes, &ProviderBundle::procedural(), &cfg).unwrap();
    assert_eq!(a.mesh.vertices, b.mesh.vertices);
    assert_eq!(a.mesh.triangles, b.mesh.triangles);
    assert!(a.mesh.is_watertight());
    assert!(a.diagnostics.subdivided_triangles > 0);
}

struct Failing;

impl NormalSynth for Failing {
    fn name(&self) -> &'static str {
        "failing_normals"
    }
    fn synthesize(&self, _: &SketchImage, _: &DepthMap, _: &ProviderContext) -> sketchface::Result<NormalMap> {
        Err(sketchface::Error::InvalidInput("no model loaded".into()))
    }
}

#[test]
fn provider_failure_returns_the_input() {
    let m = face();
    let providers = ProviderBundle {
        normal_synth: Arc::new(Failing),
        ..ProviderBundle::procedural()
    };
    let out = refine(
        &m,
        &[Stroke::ridge(forehead(), 1.0)],
        &providers,
        &RefineConfig::default(),
    )
    .unwrap();
    assert_eq!(out.mesh.vertices, m.vertices);
    let msg = out.diagnostics.error.unwrap();
    assert!(
        msg.contains("failing_normals") && msg.contains("no model loaded"),
        "{msg}"
    );
}

#[test]
fn open_mesh_is_rejected() {
    let mut m = icosphere(0.5, 2);
    m.triangles.pop();
    assert!(refine(&m, &[], &ProviderBundle::procedural(), &RefineConfig::default()).is_err());
}

#[test]
fn debug_dir_receives_every_intermediate() {
    let dir = tempfile::tempdir().unwrap();
    let m = face();
    refine_debug(
        &m,
        &[Stroke::ridge(forehead(), 1.0)],
        &ProviderBundle::procedural(),
        &RefineConfig::default(),
        Some(dir.path()),
    )
    .unwrap();
    for f in [
        "S_f.png",
        "D_c.png",
        "N.png",
        "D_c_prime.png",
        "D_f.png",
        "D_f_prime.png",
        "P.obj",
    ] {
        assert!(dir.path().join(f).metadata().unwrap().len() > 0, "{f}");
    }
}

/// Target surface: the coarse mesh, finely subdivided under the strokes,
/// with front-facing vertices moved by the target depth residual.
fn ground_truth(mc: &TriMesh, strokes: &[Stroke]) -> TriMesh {
    let cam = front();
    let target = StrokeTarget::new(&render_depth(mc, &cam), stroke_displacement_field(strokes, 512, 512, A));
    let footprint = stroke_footprint(strokes, 512, 512);
    let mut m = mc.clone();
    for _ in 0..3 {
        let region = covered_triangles(&m, &cam, &footprint);
        m = subdivide_region(&m, &region).unwrap().mesh;
    }
    let normals = m.vertex_normals();
    for (v, n) in m.vertices.iter_mut().zip(&normals) {
        if n.z > 0.0 {
            let (u, w, _) = cam.project(v);
            v.z += target.residual_at(u, w);
        }
    }
    m
}

/// Procedural enhancement with the result moved right by `.0` pixels.
struct ShiftedEnhance(usize);

impl DepthEnhance for ShiftedEnhance {
    fn enhance(&self, depth: &DepthMap, normals: &NormalMap, ctx: &ProviderContext) -> sketchface::Result<DepthMap> {
        let e = ProceduralDepthEnhance.enhance(depth, normals, ctx)?;
        Ok(DepthMap::from_fn(e.width, e.height, |i, j| {
            i.checked_sub(self.0).and_then(|si| e.get(si, j))
        }))
    }
}

#[test]
fn flow_alignment_repairs_a_shifted_depth_map() {
    let m = face();
    let strokes = [Stroke::ridge(vec![[256.0, 200.0], [256.0, 320.0]], 1.0)];
    let gt = ground_truth(&m, &strokes);
    let shifted = ProviderBundle {
        depth_enhance: Arc::new(ShiftedEnhance(3)),
        ..ProviderBundle::procedural()
    };
    let run = |flow| {
        let cfg = RefineConfig {
            flow,
            ..Default::default()
        };
        chamfer(&refine(&m, &strokes, &shifted, &cfg).unwrap().mesh, &gt)
    };
    let (with_flow, without) = (run(FlowMode::Gather), run(FlowMode::Disabled));
    assert!(with_flow <= 0.8 * without, "flow {with_flow} vs none {without}");
}

#[test]
fn combined_guidance_beats_either_alone() {
    let m = face();
    let cases = [
        vec![Stroke::ridge(vec![[256.0, 200.0], [256.0, 320.0]], 1.0)],
        vec![Stroke::valley(vec![[200.0, 300.0], [312.0, 300.0]], 1.0)],
        vec![Stroke::ridge(vec![[190.0, 230.0], [250.0, 200.0], [320.0, 240.0]], 1.0)],
    ];
    let base = RefineConfig::default();
    for strokes in &cases {
        let gt = ground_truth(&m, strokes);
        let score = |cfg: &RefineConfig| {
            let start = Instant::now();
            let out = refine(&m, strokes, &ProviderBundle::procedural(), cfg).unwrap();
            assert!(start.elapsed().as_secs_f64() < 2.0);
            chamfer(&out.mesh, &gt)
        };
        let combined = score(&base);
        let implicit_only = score(&RefineConfig {
            depth_iterations: 0,
            ..base.clone()
        });
        let depth_only = score(&RefineConfig {
            implicit_iterations: 0,
            ..base.clone()
        });
        assert!(
            combined <= implicit_only && combined <= depth_only,
            "{combined} {implicit_only} {depth_only}"
        );
        assert!(combined < chamfer(&m, &gt));
    }
}

#[test]
fn preview_matches_displaced_depth() {
    let m = face();
    let cam = front();
    let depth = render_depth(&m, &cam);
    assert_eq!(stroke_preview(&depth, &[], &cam, A), normal_from_depth(&depth, &cam));

    let stroke = Stroke::ridge(forehead(), 1.0);
    let start = Instant::now();
    let preview = stroke_preview(&depth, std::slice::from_ref(&stroke), &cam, A);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    assert!(ms <= 50.0, "{ms} ms");
    // Central differences reach one pixel past the support.
    let zone = stroke_displacement_field(&[stroke], 512, 512, A).dilated_support(1);
    let baseline = normal_from_depth(&depth, &cam);
    for (k, &near) in zone.iter().enumerate() {
        if !near {
            assert_eq!(preview.normals[k], baseline.normals[k]);
        }
    }
}

/// All-pairs reference for `idw_refine`.
fn brute_force_idw(mesh: &TriMesh, cloud: &[Point3<f64>], p: &IdwParams) -> Vec<Point3<f64>> {
    mesh.vertices
        .iter()
        .map(|v| {
            let mut d: Vec<(f64, usize)> = cloud.iter().enumerate().map(|(i, q)| ((v - q).norm(), i)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if d[0].0 > p.radius {
                return *v;
            }
            d.truncate(p.neighbors);
            if d[0].0 < p.epsilon {
                return cloud[d[0].1];
            }
            let mut acc = Vector3::zeros();
            let mut total = 0.0;
            for (di, i) in d {
                let w = di.powf(-p.power);
                acc += cloud[i].coords * w;
                total += w;
            }
            Point3::from(acc / total)
        })
        .collect()
}

#[test]
fn idw_matches_brute_force() {
    let params = RefineConfig::default().idw_params();
    let wide = IdwParams { radius: 0.5, ..params };
    for seed in 0..20 {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut pt = || {
            Point3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            )
        };
        let cloud: Vec<Point3<f64>> = (0..100).map(|_| pt()).collect();
        let mut verts: Vec<Point3<f64>> = (0..100).map(|_| pt()).collect();
        verts[0] = cloud[7];
        let mesh = TriMesh::new(verts, vec![]);
        let pc = PointCloud {
            points: cloud.clone(),
            normals: None,
        };
        for p in [params, wide] {
            let fast = idw_refine(&mesh, &pc, &p);
            for (a, b) in fast.vertices.iter().zip(brute_force_idw(&mesh, &cloud, &p)) {
                assert!((a - b).norm() <= 1e-12, "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn analytic_sphere_converges_in_one_step() {
    let m = icosphere(1.2, 5);
    assert!(m.vertices.len() >= 10_000);
    let field = SphereField::new(Point3::origin(), 1.0);
    let start = Instant::now();
    let normals = field_normals(&m, &field);
    let (out, _) = implicit_update_along(&m, &field, 2.0, &normals);
    let secs = start.elapsed().as_secs_f64();
    for v in &out.vertices {
        assert!((v.coords.norm() - 1.0).abs() <= 1e-6);
    }
    assert!(secs < 0.1, "{secs} s");
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idw_stays_in_the_neighbor_hull(
        cloud in prop::collection::vec(point(), 1..40),
        v in point(),
        k in 1usize..10,
    ) {
        let cloud: Vec<Point3<f64>> = cloud.into_iter().map(Point3::from).collect();
        let v = Point3::from(v);
        let p = IdwParams { neighbors: k, power: 2.0, epsilon: 1e-7, radius: 4.0 };
        let out = idw_refine(&TriMesh::new(vec![v], vec![]), &PointCloud { points: cloud.clone(), normals: None }, &p);
        let moved = out.vertices[0];
        let mut near: Vec<&Point3<f64>> = cloud.iter().collect();
        near.sort_by(|a, b| (v - **a).norm().total_cmp(&(v - **b).norm()));
        near.truncate(k);
        near.push(&v);
        // Support-function test of hull membership along sampled directions.
        for d in [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 1.0, 1.0), Vector3::new(1.0, -2.0, 0.5)] {
            for d in [d, -d] {
                let hi = near.iter().map(|q| q.coords.dot(&d)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(moved.coords.dot(&d) <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn sphere_meshes_land_on_any_sphere_field(r0 in 0.2..1.5f64, r1 in 0.2..1.5f64) {
        let m = icosphere(r0, 3);
        let field = SphereField::new(Point3::origin(), r1);
        let (out, _) = implicit_update_along(&m, &field, 2.0, &field_normals(&m, &field));
        for v in &out.vertices {
            prop_assert!((v.coords.norm() - r1).abs() <= 1e-6);
        }
    }

    #[test]
    fn implicit_update_never_flips_triangles(r in 0.3..0.6f64, c in -0.2..0.2f64) {
        let m = icosphere(0.5, 2);
        let field = SphereField::new(Point3::new(c, 0.0, 0.0), r);
        let (out, _) = implicit_update(&m, &field, 2.0);
        for t in 0..m.triangles.len() {
            prop_assert!(out.face_normal_raw(t).dot(&m.face_normal_raw(t)) >= 0.0);
        }
    }
}
