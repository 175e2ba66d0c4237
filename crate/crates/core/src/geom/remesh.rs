//! Isotropic remeshing: split long edges, collapse short ones, equalize
//! valences by flipping, relax tangentially and project back onto the input.

use std::collections::BinaryHeap;

use nalgebra::{Point3, Vector3};

use super::bvh::TriangleBvh;
use super::halfedge::HalfEdgeMesh;
use super::mesh::TriMesh;

/// Edges shorter than this are collapsed before anything else.
pub const DEGENERATE_EDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemeshParams {
    pub target_edge_length: f64,
    pub iterations: usize,
}

impl RemeshParams {
    /// 2% of the bounding-box diagonal, 4 iterations.
    pub fn for_mesh(mesh: &TriMesh) -> Self {
        Self {
            target_edge_length: 0.02 * mesh.bbox_diagonal(),
            iterations: 4,
        }
    }
}

/// Remeshes toward uniform edge length `target_edge_length`.
///
/// Non-manifold input is returned unchanged (with a warning). Boundary
/// edges and vertices, if any, are left in place.
pub fn remesh(mesh: &TriMesh, target_edge_length: f64, iterations: usize) -> TriMesh {
    assert!(target_edge_length > 0.0, "target edge length must be positive");
    if mesh.is_empty() {
        return mesh.clone();
    }
    let mut he = match HalfEdgeMesh::from_trimesh(mesh) {
        Ok(he) => he,
        Err(e) => {
            log::warn!("remesh skipped: {e}");
            return mesh.clone();
        }
    };
    let bvh = TriangleBvh::new(mesh);
    let lo = 0.8 * target_edge_length;
    let hi = 4.0 / 3.0 * target_edge_length;

    collapse_short(&mut he, DEGENERATE_EDGE, f64::INFINITY);
    for _ in 0..iterations {
        split_long(&mut he, hi, None);
        collapse_short(&mut he, lo, hi);
        equalize_valences(&mut he);
        relax(&mut he, &bvh);
    }
    split_long(&mut he, hi, Some(&bvh));
    he.to_trimesh()
}

/// Remesh with [`RemeshParams::for_mesh`] defaults.
pub fn remesh_default(mesh: &TriMesh) -> TriMesh {
    let p = RemeshParams::for_mesh(mesh);
    remesh(mesh, p.target_edge_length, p.iterations)
}

fn split_long(he: &mut HalfEdgeMesh, hi: f64, project: Option<&TriangleBvh>) {
    // Longest edge first; bisecting shorter edges first can fan out around
    // a vertex indefinitely.
    let mut heap: BinaryHeap<(u64, u32)> = he
        .edges()
        .into_iter()
        .map(|h| (he.edge_length(h).to_bits(), h))
        .filter(|&(l, _)| f64::from_bits(l) > hi)
        .collect();
    while let Some((len, h)) = heap.pop() {
        if !he.is_live_halfedge(h) || !he.is_interior_edge(h) || he.edge_length(h).to_bits() != len {
            continue;
        }
        let (a, b) = (he.from(h), he.to(h));
        let mut mid = nalgebra::center(&he.pos[a as usize], &he.pos[b as usize]);
        if let Some(bvh) = project {
            if let Some(c) = bvh.closest(&mid) {
                mid = c.point;
            }
        }
        let before = he.halfedge_count() as u32;
        if he.split(h, mid).is_some() {
            for n in std::iter::once(h).chain(before..he.halfedge_count() as u32) {
                let l = he.edge_length(n);
                if l > hi && (n == h || n < he.twin(n)) {
                    heap.push((l.to_bits(), n));
                }
            }
        }
    }
}

fn collapse_short(he: &mut HalfEdgeMesh, lo: f64, hi: f64) {
    let edges = he.edges();
    for h in edges {
        if !he.is_live_halfedge(h) || he.edge_length(h) >= lo {
            continue;
        }
        for cand in [h, he.twin(h)] {
            if try_collapse(he, cand, hi) {
                break;
            }
        }
    }
}

fn try_collapse(he: &mut HalfEdgeMesh, h: u32, hi: f64) -> bool {
    if !he.can_collapse(h) {
        return false;
    }
    let (a, b) = (he.from(h), he.to(h));
    let at = nalgebra::center(&he.pos[a as usize], &he.pos[b as usize]);
    // No edge of the merged one-ring may exceed `hi`, and no surviving
    // triangle may flip.
    for v in [a, b] {
        for (x, y) in he.fan(v) {
            if (he.pos[x as usize] - at).norm() > hi && x != a && x != b {
                return false;
            }
            if x == a || x == b || y == a || y == b {
                continue;
            }
            let (px, py) = (he.pos[x as usize], he.pos[y as usize]);
            let old = (px - he.pos[v as usize]).cross(&(py - he.pos[v as usize]));
            let new = (px - at).cross(&(py - at));
            if old.dot(&new) <= 0.0 {
                return false;
            }
        }
    }
    he.collapse(h, at);
    true
}

fn valence_target(he: &HalfEdgeMesh, v: u32) -> i64 {
    if he.is_boundary_vertex(v) {
        4
    } else {
        6
    }
}

fn equalize_valences(he: &mut HalfEdgeMesh) {
    let edges = he.edges();
    for h in edges {
        if !he.is_live_halfedge(h) || !he.can_flip(h) {
            continue;
        }
        let (a, b) = (he.from(h), he.to(h));
        let (c, d) = he.opposite(h);
        let val = |v: u32| he.valence(v) as i64;
        let dev = |v: u32, delta: i64| (val(v) + delta - valence_target(he, v)).abs();
        let before = dev(a, 0) + dev(b, 0) + dev(c, 0) + dev(d, 0);
        let after = dev(a, -1) + dev(b, -1) + dev(c, 1) + dev(d, 1);
        if after >= before {
            continue;
        }
        // Geometric sanity: the new triangles must face the same way as
        // the old pair.
        let (pa, pb, pc, pd) = (
            he.pos[a as usize],
            he.pos[b as usize],
            he.pos[c as usize],
            he.pos[d as usize],
        );
        let n_old = (pb - pa).cross(&(pc - pa)) + (pa - pb).cross(&(pd - pb));
        let n1 = (pd - pa).cross(&(pc - pa));
        let n2 = (pb - pd).cross(&(pc - pd));
        if n1.dot(&n_old) <= 0.0 || n2.dot(&n_old) <= 0.0 || n1.dot(&n2) <= 0.0 {
            continue;
        }
        he.flip(h);
    }
}

fn relax(he: &mut HalfEdgeMesh, bvh: &TriangleBvh) {
    let n = he.vertex_count();
    let mut next: Vec<Option<Point3<f64>>> = vec![None; n];
    for v in 0..n as u32 {
        if !he.is_live_vertex(v) || he.is_boundary_vertex(v) {
            continue;
        }
        let nbrs = he.neighbors(v);
        let mut centroid = Vector3::zeros();
        for &u in &nbrs {
            centroid += he.pos[u as usize].coords;
        }
        centroid /= nbrs.len() as f64;
        let p = he.pos[v as usize];
        let normal = he.vertex_normal(v);
        let delta = centroid - p.coords;
        let tangential = delta - normal * normal.dot(&delta);
        next[v as usize] = Some(p + tangential);
    }
    for (v, q) in next.into_iter().enumerate() {
        if let Some(q) = q {
            he.pos[v] = bvh.closest(&q).map(|c| c.point).unwrap_or(q);
        }
    }
}
