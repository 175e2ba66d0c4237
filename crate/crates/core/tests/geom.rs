use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sketchface::geom::field::{field_union, CapsuleField, EllipsoidField, SphereField};
use sketchface::geom::mesh::{cuboid, icosahedron, icosphere, tetrahedron};
use sketchface::geom::*;

fn residual(mesh: &TriMesh, f: &dyn ScalarField) -> f64 {
    mesh.vertices.iter().map(|v| f.sample(v).abs()).fold(0.0, f64::max)
}

#[test]
fn analytic_residuals_stay_within_one_and_a_half_voxels() {
    let fields: Vec<Box<dyn ScalarField>> = vec![
        Box::new(SphereField::new(Point3::origin(), 0.5)),
        Box::new(EllipsoidField::new(
            Point3::new(0.05, 0.0, 0.0),
            Vector3::new(0.7, 0.45, 0.3),
        )),
        Box::new(CapsuleField {
            a: Point3::new(-0.4, -0.2, 0.0),
            b: Point3::new(0.4, 0.3, 0.1),
            radius: 0.25,
        }),
    ];
    for res in [64, 128] {
        let voxel = 2.0 / res as f64;
        for f in &fields {
            let m = marching_cubes(f.as_ref(), res, Aabb::unit());
            assert!(m.is_watertight());
            let r = residual(&m, f.as_ref());
            assert!(r <= 1.5 * voxel, "res {res}: residual {r}");
        }
    }
}

#[test]
fn sphere_area_and_speed() {
    let f = SphereField::new(Point3::origin(), 0.5);
    let start = Instant::now();
    let m = marching_cubes(&f, 64, Aabb::unit());
    let secs = start.elapsed().as_secs_f64();
    let exact = 4.0 * std::f64::consts::PI * 0.25;
    assert!((m.area() - exact).abs() / exact <= 0.05);
    assert!(secs < 0.5, "{secs} s");
}

/// Ray parity along a fixed skew direction, Möller–Trumbore per triangle.
fn ray_parity_inside(mesh: &TriMesh, p: &Point3<f64>) -> bool {
    let dir = Vector3::new(0.5773, 0.6123, 0.5402).normalize();
    let mut hits = 0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        let (e1, e2) = (b - a, c - a);
        let h = dir.cross(&e2);
        let det = e1.dot(&h);
        if det.abs() < 1e-14 {
            continue;
        }
        let s = p - a;
        let u = s.dot(&h) / det;
        let q = s.cross(&e1);
        let v = dir.dot(&q) / det;
        let dist = e2.dot(&q) / det;
        if (0.0..=1.0).contains(&u) && v >= 0.0 && u + v <= 1.0 && dist > 0.0 {
            hits += 1;
        }
    }
    hits % 2 == 1
}

#[test]
fn lattice_signs_agree_with_ray_parity() {
    let shapes = [
        cuboid(Point3::new(-0.43, -0.31, -0.52), Point3::new(0.38, 0.47, 0.29)),
        icosphere(0.6, 3).transformed(|p| Point3::new(p.x * 1.3, p.y * 0.8, p.z)),
    ];
    let mut rng = StdRng::seed_from_u64(11);
    for m in &shapes {
        let g = mesh_to_field(m, 48).unwrap();
        let n = g.points_per_axis();
        let mut checked = 0;
        while checked < 1000 {
            let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            let v = g.at(i, j, k);
            if v.abs() < 1e-6 {
                continue;
            }
            assert_eq!(
                v > 0.0,
                ray_parity_inside(m, &g.point(i, j, k)),
                "lattice ({i}, {j}, {k})"
            );
            checked += 1;
        }
    }
}

#[test]
fn sphere_field_round_trip_stays_within_two_spacings() {
    let m = icosphere(0.55, 4);
    let g = mesh_to_field(&m, 64).unwrap();
    let back = marching_cubes_grid(&g);
    let h = sketchface::metrics::hausdorff(&m, &back);
    assert!(h <= 2.0 * g.spacing, "{h}");
}

#[test]
fn union_component_counts() {
    let grid = |c: Point3<f64>| GridField::from_field(&SphereField::new(c, 0.3), 64, Aabb::unit());
    let apart = field_union(&grid(Point3::new(-0.5, 0.0, 0.0)), &grid(Point3::new(0.5, 0.0, 0.0))).unwrap();
    assert_eq!(marching_cubes_grid(&apart).connected_components(), 2);
    let overlap = field_union(&grid(Point3::new(-0.2, 0.0, 0.0)), &grid(Point3::new(0.2, 0.0, 0.0))).unwrap();
    let m = marching_cubes_grid(&overlap);
    assert_eq!(m.connected_components(), 1);
    assert_eq!(m.boundary_edge_count(), 0);
    assert!(field_union(&grid(Point3::origin()), &GridField::lattice(32, Aabb::unit())).is_err());
}

/// Earth mover's distance between two edge-length distributions, by
/// comparing quantiles on a common grid.
fn emd(a: &[f64], b: &[f64]) -> f64 {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let q = |v: &[f64], t: f64| v[((t * v.len() as f64) as usize).min(v.len() - 1)];
    let n = 1000;
    (0..n)
        .map(|k| (k as f64 + 0.5) / n as f64)
        .map(|t| (q(&a, t) - q(&b, t)).abs())
        .sum::<f64>()
        / n as f64
}

#[test]
fn isotropic_sphere_keeps_its_edge_histogram() {
    let m = icosphere(0.8, 4);
    let lens = m.edge_lengths();
    let target = lens.iter().sum::<f64>() / lens.len() as f64;
    let out = remesh(&m, target, 4);
    let moved = emd(&lens, &out.edge_lengths()) / target;
    assert!(moved <= 0.05, "{moved}");
    assert!(out.is_watertight());
}

#[test]
fn remesh_band_and_drift() {
    let m = icosphere(0.7, 3).transformed(|p| Point3::new(p.x, p.y * 1.2, p.z * 0.7));
    let target = 0.06;
    let out = remesh(&m, target, 4);
    assert!(out.is_watertight());
    let lens = out.edge_lengths();
    let ok = lens
        .iter()
        .filter(|&&l| (0.5 * target..=1.5 * target).contains(&l))
        .count();
    assert!(ok as f64 >= 0.9 * lens.len() as f64);
    let bvh = TriangleBvh::new(&m);
    let drift = out.vertices.iter().map(|v| bvh.distance(v)).fold(0.0, f64::max);
    assert!(drift <= target, "{drift}");
    let max = remesh(&icosahedron(1.0), 0.05, 4)
        .edge_lengths()
        .into_iter()
        .fold(0.0, f64::max);
    assert!(max <= 0.075);
}

/// Every edge has exactly two incident triangles.
fn conforming(m: &TriMesh) -> bool {
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in &m.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    count.values().all(|&c| c == 2)
}

#[test]
fn subdivision_is_conforming() {
    let tet = tetrahedron();
    assert_eq!(subdivide_region(&tet, &[]).unwrap().mesh, tet);
    let one = subdivide_region(&tet, &[0]).unwrap().mesh;
    assert_eq!(one.triangles.len(), 4 + 3 * 2);
    assert!(conforming(&one));
    let all = subdivide_region(&tet, &[0, 1, 2, 3]).unwrap().mesh;
    assert_eq!(all.triangles.len(), 16);
    assert!(conforming(&all));
}

#[test]
fn laplacian_on_a_coarse_head_sized_mesh() {
    let m = marching_cubes(&SphereField::new(Point3::origin(), 0.7), 64, Aabb::unit());
    let h = 0;
    let target = m.vertices[h] + m.vertices[h].coords.normalize() * 0.05;
    let roi = k_ring(&m, &[h], 6);
    let handles: BTreeMap<_, _> = [(h, target)].into();
    let start = Instant::now();
    let out = laplacian_deform(&m, &handles, &roi).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!((out.vertices[h] - target).norm() <= 1e-6);
    let inside: std::collections::HashSet<usize> = roi.iter().copied().collect();
    for (v, (a, b)) in out.vertices.iter().zip(&m.vertices).enumerate() {
        if !inside.contains(&v) {
            assert_eq!(a, b);
        }
    }
    assert!(secs < 0.1, "{secs} s");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn union_is_commutative_and_associative(
        c in prop::collection::vec([-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5], 3),
        r in prop::collection::vec(0.1f64..0.4, 3),
    ) {
        let g: Vec<GridField> = c.iter().zip(&r)
            .map(|(c, r)| GridField::from_field(&SphereField::new(Point3::from(*c), *r), 16, Aabb::unit()))
            .collect();
        let ab = field_union(&g[0], &g[1]).unwrap();
        let ba = field_union(&g[1], &g[0]).unwrap();
        prop_assert_eq!(&ab.values, &ba.values);
        let left = field_union(&ab, &g[2]).unwrap();
        let right = field_union(&g[0], &field_union(&g[1], &g[2]).unwrap()).unwrap();
        prop_assert_eq!(&left.values, &right.values);
    }

    #[test]
    fn closed_inputs_stay_closed(levels in 1usize..3, target in 0.05f64..0.3, picks in prop::collection::vec(0usize..1000, 0..12)) {
        let m = icosphere(0.6, levels);
        prop_assert!(remesh(&m, target, 2).is_watertight());
        let region: Vec<usize> = picks.iter().map(|p| p % m.triangles.len()).collect();
        prop_assert_eq!(subdivide_region(&m, &region).unwrap().mesh.boundary_edge_count(), 0);
    }
}
