//! Conforming 1→4 refinement of a triangle region.

use std::collections::HashMap;

use nalgebra::Point3;

use super::mesh::TriMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Subdivision {
    pub mesh: TriMesh,
    /// Original vertices keep their ids; vertex `n + k` is the midpoint of
    /// `edge_parents[k]`.
    pub edge_parents: Vec<(usize, usize)>,
    /// Source triangle of every output triangle.
    pub triangle_parents: Vec<usize>,
}

/// Splits every region triangle into four at its edge midpoints.
/// Triangles sharing a split edge receive a green split (2 or 3 pieces, or
/// 4 when all their edges were split) so no T-junction remains. Triangles
/// with no split edge keep their index and vertices.
pub fn subdivide_region(mesh: &TriMesh, region: &[usize]) -> Result<Subdivision> {
    let nt = mesh.triangles.len();
    if let Some(&bad) = region.iter().find(|&&t| t >= nt) {
        return Err(Error::InvalidInput(format!(
            "triangle id {bad} out of range ({nt} triangles)"
        )));
    }
    let mut vertices = mesh.vertices.clone();
    let mut edge_parents = Vec::new();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut in_region = vec![false; nt];
    let mut sorted: Vec<usize> = region.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &t in &sorted {
        in_region[t] = true;
        let tri = mesh.triangles[t];
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            midpoint.entry(key).or_insert_with(|| {
                vertices.push(nalgebra::center(&mesh.vertices[key.0], &mesh.vertices[key.1]));
                edge_parents.push(key);
                vertices.len() - 1
            });
        }
    }

    let mut triangles = Vec::with_capacity(nt + 3 * sorted.len() + 8);
    let mut triangle_parents = Vec::with_capacity(triangles.capacity());
    let mut extra = Vec::new();
    let mid = |a: usize, b: usize| midpoint.get(&(a.min(b), a.max(b))).copied();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let m = [mid(tri[0], tri[1]), mid(tri[1], tri[2]), mid(tri[2], tri[0])];
        let pieces = split_triangle(*tri, m, &vertices);
        triangles.push(pieces[0]);
        triangle_parents.push(t);
        for p in &pieces[1..] {
            extra.push((*p, t));
        }
    }
    for (p, t) in extra {
        triangles.push(p);
        triangle_parents.push(t);
    }
    Ok(Subdivision {
        mesh: TriMesh::new(vertices, triangles),
        edge_parents,
        triangle_parents,
    })
}

fn split_triangle(t: [usize; 3], m: [Option<usize>; 3], pos: &[Point3<f64>]) -> Vec<[usize; 3]> {
    let count = m.iter().filter(|x| x.is_some()).count();
    match count {
        0 => vec![t],
        3 => {
            let (m0, m1, m2) = (m[0].unwrap(), m[1].unwrap(), m[2].unwrap());
            vec![[m0, m1, m2], [t[0], m0, m2], [m0, t[1], m1], [m2, m1, t[2]]]
        }
        1 => {
            // Rotate so the split edge is t0-t1.
            let k = m.iter().position(|x| x.is_some()).unwrap();
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let mm = m[k].unwrap();
            vec![[a, mm, c], [mm, b, c]]
        }
        _ => {
            // Rotate so the unsplit edge is t2-t0.
            let k = (m.iter().position(|x| x.is_none()).unwrap() + 1) % 3;
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let mab = m[k].unwrap();
            let mbc = m[(k + 1) % 3].unwrap();
            // Quad a, mab, mbc, c split along its shorter diagonal.
            let d1 = (pos[a] - pos[mbc]).norm_squared();
            let d2 = (pos[mab] - pos[c]).norm_squared();
            if d1 <= d2 {
                vec![[mab, b, mbc], [a, mab, mbc], [a, mbc, c]]
            } else {
                vec![[mab, b, mbc], [a, mab, c], [mab, mbc, c]]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::{icosphere, tetrahedron};

    /// Every edge of a closed mesh must be used by exactly two triangles in
    /// opposite directions; a T-junction breaks this.
    fn conforming(m: &TriMesh) -> bool {
        m.is_watertight()
    }

    #[test]
    fn empty_region_is_identity() {
        let m = icosphere(1.0, 1);
        let s = subdivide_region(&m, &[]).unwrap();
        assert_eq!(s.mesh.vertices, m.vertices);
        assert_eq!(s.mesh.triangles, m.triangles);
        assert!(s.edge_parents.is_empty());
    }

    #[test]
    fn single_tetra_face() {
        let s = subdivide_region(&tetrahedron(), &[0]).unwrap();
        assert_eq!(s.mesh.triangles.len(), 4 + 3 * 2);
        assert_eq!(s.mesh.vertices.len(), 4 + 3);
        assert!(conforming(&s.mesh));
        let before = tetrahedron().area();
        assert!((s.mesh.area() - before).abs() < 1e-12);
    }

    #[test]
    fn full_region_quadruples() {
        let m = icosphere(1.0, 1);
        let all: Vec<usize> = (0..m.triangles.len()).collect();
        let s = subdivide_region(&m, &all).unwrap();
        assert_eq!(s.mesh.triangles.len(), 4 * m.triangles.len());
        assert!(conforming(&s.mesh));
    }

    #[test]
    fn untouched_triangles_keep_index() {
        let m = icosphere(1.0, 2);
        let s = subdivide_region(&m, &[5, 17]).unwrap();
        assert!(conforming(&s.mesh));
        let n = m.vertices.len();
        for (t, tri) in m.triangles.iter().enumerate() {
            let out = s.mesh.triangles[t];
            if out.iter().all(|&v| v < n) && s.triangle_parents.iter().filter(|&&p| p == t).count() == 1 {
                assert_eq!(out, *tri);
            }
        }
    }

    #[test]
    fn out_of_range_region_rejected() {
        assert!(subdivide_region(&tetrahedron(), &[4]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn any_region_stays_closed(ids in proptest::collection::vec(0usize..320, 0..60)) {
            let m = icosphere(1.0, 2);
            let s = subdivide_region(&m, &ids).unwrap();
            proptest::prop_assert!(conforming(&s.mesh));
            proptest::prop_assert!((s.mesh.area() - m.area()).abs() < 1e-9);
        }
    }
}
