//! Half-edge connectivity with local edit operators (split, collapse, flip).
//!
//! Elements are never removed from the arrays; collapses mark them dead and
//! [`HalfEdgeMesh::to_trimesh`] compacts. Operators refuse boundary edges,
//! so circulation only ever happens around interior vertices.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::mesh::TriMesh;
use crate::error::{Error, Result};

pub const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct HalfEdgeMesh {
    pub pos: Vec<Point3<f64>>,
    v_out: Vec<u32>,
    v_boundary: Vec<bool>,
    v_dead: Vec<bool>,
    live_vertices: usize,
    he_to: Vec<u32>,
    he_next: Vec<u32>,
    he_twin: Vec<u32>,
    he_face: Vec<u32>,
    he_dead: Vec<bool>,
    f_he: Vec<u32>,
    f_dead: Vec<bool>,
}

impl HalfEdgeMesh {
    /// Builds connectivity. Fails on edges shared by more than two
    /// triangles or inconsistently oriented neighbors.
    pub fn from_trimesh(mesh: &TriMesh) -> Result<Self> {
        mesh.validate()?;
        let nv = mesh.vertices.len();
        let nf = mesh.triangles.len();
        let mut m = HalfEdgeMesh {
            pos: mesh.vertices.clone(),
            v_out: vec![NONE; nv],
            v_boundary: vec![false; nv],
            v_dead: vec![false; nv],
            live_vertices: nv,
            he_to: Vec::with_capacity(3 * nf),
            he_next: Vec::with_capacity(3 * nf),
            he_twin: Vec::with_capacity(3 * nf),
            he_face: Vec::with_capacity(3 * nf),
            he_dead: Vec::with_capacity(3 * nf),
            f_he: Vec::with_capacity(nf),
            f_dead: vec![false; nf],
        };
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(3 * nf);
        for (f, t) in mesh.triangles.iter().enumerate() {
            let base = m.he_to.len() as u32;
            for k in 0..3 {
                let (a, b) = (t[k] as u32, t[(k + 1) % 3] as u32);
                m.he_to.push(b);
                m.he_next.push(base + ((k as u32 + 1) % 3));
                m.he_twin.push(NONE);
                m.he_face.push(f as u32);
                m.he_dead.push(false);
                if directed.insert((a, b), base + k as u32).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "directed edge ({a}, {b}) appears twice (non-manifold or inconsistent winding)"
                    )));
                }
                m.v_out[a as usize] = base + k as u32;
            }
            m.f_he.push(base);
        }
        let interior = m.he_to.len();
        for h in 0..interior {
            if m.he_twin[h] != NONE {
                continue;
            }
            let b = m.he_to[h];
            let a = m.he_to[m.prev(h as u32) as usize];
            if let Some(&t) = directed.get(&(b, a)) {
                m.he_twin[h] = t;
                m.he_twin[t as usize] = h as u32;
            } else {
                // Boundary half-edge with no face; `next` is left dangling
                // because boundary vertices are never circulated.
                let t = m.he_to.len() as u32;
                m.he_to.push(a);
                m.he_next.push(NONE);
                m.he_twin.push(h as u32);
                m.he_face.push(NONE);
                m.he_dead.push(false);
                m.he_twin[h] = t;
                m.v_boundary[a as usize] = true;
                m.v_boundary[b as usize] = true;
            }
        }
        // Isolated vertices are treated as dead.
        for v in 0..nv {
            if m.v_out[v] == NONE {
                m.v_dead[v] = true;
                m.live_vertices -= 1;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn to(&self, h: u32) -> u32 {
        self.he_to[h as usize]
    }
    #[inline]
    pub fn from(&self, h: u32) -> u32 {
        self.he_to[self.he_twin[h as usize] as usize]
    }
    #[inline]
    pub fn next(&self, h: u32) -> u32 {
        self.he_next[h as usize]
    }
    #[inline]
    pub fn prev(&self, h: u32) -> u32 {
        self.next(self.next(h))
    }
    #[inline]
    pub fn twin(&self, h: u32) -> u32 {
        self.he_twin[h as usize]
    }
    #[inline]
    pub fn face(&self, h: u32) -> u32 {
        self.he_face[h as usize]
    }

    pub fn halfedge_count(&self) -> usize {
        self.he_to.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.pos.len()
    }

    pub fn live_vertex_count(&self) -> usize {
        self.live_vertices
    }

    pub fn is_live_halfedge(&self, h: u32) -> bool {
        !self.he_dead[h as usize]
    }

    pub fn is_live_vertex(&self, v: u32) -> bool {
        !self.v_dead[v as usize]
    }

    pub fn is_boundary_vertex(&self, v: u32) -> bool {
        self.v_boundary[v as usize]
    }

    /// True when both sides of the edge carry a face.
    pub fn is_interior_edge(&self, h: u32) -> bool {
        self.face(h) != NONE && self.face(self.twin(h)) != NONE
    }

    /// Canonical representative of each live edge (the smaller half-edge id).
    pub fn edges(&self) -> Vec<u32> {
        (0..self.he_to.len() as u32)
            .filter(|&h| !self.he_dead[h as usize] && h < self.twin(h))
            .collect()
    }

    pub fn edge_length(&self, h: u32) -> f64 {
        (self.pos[self.to(h) as usize] - self.pos[self.from(h) as usize]).norm()
    }

    /// Outgoing half-edges of an interior vertex, counter-clockwise.
    pub fn outgoing(&self, v: u32) -> Vec<u32> {
        debug_assert!(!self.v_boundary[v as usize]);
        let h0 = self.v_out[v as usize];
        let mut out = Vec::with_capacity(8);
        let mut h = h0;
        loop {
            out.push(h);
            h = self.twin(self.prev(h));
            if h == h0 || out.len() > 1024 {
                break;
            }
        }
        out
    }

    pub fn neighbors(&self, v: u32) -> Vec<u32> {
        self.outgoing(v).into_iter().map(|h| self.to(h)).collect()
    }

    pub fn valence(&self, v: u32) -> usize {
        self.outgoing(v).len()
    }

    fn face_normal_of(&self, a: u32, b: u32, c: u32) -> Vector3<f64> {
        let (pa, pb, pc) = (self.pos[a as usize], self.pos[b as usize], self.pos[c as usize]);
        (pb - pa).cross(&(pc - pa))
    }

    /// Area-weighted unit normal of an interior vertex.
    pub fn vertex_normal(&self, v: u32) -> Vector3<f64> {
        let mut n = Vector3::zeros();
        for h in self.outgoing(v) {
            n += self.face_normal_of(v, self.to(h), self.to(self.next(h)));
        }
        n.try_normalize(0.0).unwrap_or(Vector3::z())
    }

    fn new_halfedge(&mut self, to: u32, face: u32) -> u32 {
        self.he_to.push(to);
        self.he_next.push(NONE);
        self.he_twin.push(NONE);
        self.he_face.push(face);
        self.he_dead.push(false);
        (self.he_to.len() - 1) as u32
    }

    fn link(&mut self, a: u32, b: u32, c: u32, face: u32) {
        self.he_next[a as usize] = b;
        self.he_next[b as usize] = c;
        self.he_next[c as usize] = a;
        for h in [a, b, c] {
            self.he_face[h as usize] = face;
        }
        self.f_he[face as usize] = a;
    }

    fn pair(&mut self, a: u32, b: u32) {
        self.he_twin[a as usize] = b;
        self.he_twin[b as usize] = a;
    }

    /// Splits an interior edge at `at`, returning the new vertex.
    pub fn split(&mut self, h: u32, at: Point3<f64>) -> Option<u32> {
        if !self.is_interior_edge(h) {
            return None;
        }
        let t = self.twin(h);
        let (h1, h2) = (self.next(h), self.prev(h));
        let (t1, t2) = (self.next(t), self.prev(t));
        let a = self.from(h);
        let b = self.to(h);
        let c = self.to(h1);
        let d = self.to(t1);
        let (f0, f1) = (self.face(h), self.face(t));
        let m = self.pos.len() as u32;
        self.pos.push(at);
        self.v_boundary.push(false);
        self.v_dead.push(false);
        self.live_vertices += 1;
        self.v_out.push(NONE);
        let f2 = self.f_he.len() as u32;
        let f3 = f2 + 1;
        self.f_he.push(NONE);
        self.f_he.push(NONE);
        self.f_dead.push(false);
        self.f_dead.push(false);

        // h: a→m, t: m→a
        self.he_to[h as usize] = m;
        let p = self.new_halfedge(b, f2); // m→b
        let q = self.new_halfedge(m, f3); // b→m
        let w = self.new_halfedge(c, f0); // m→c
        let y = self.new_halfedge(m, f2); // c→m
        let z = self.new_halfedge(d, f3); // m→d
        let x = self.new_halfedge(m, f1); // d→m
        self.pair(p, q);
        self.pair(w, y);
        self.pair(z, x);
        self.link(h, w, h2, f0);
        self.link(p, h1, y, f2);
        self.link(t, t1, x, f1);
        self.link(q, z, t2, f3);
        self.v_out[m as usize] = p;
        self.v_out[b as usize] = h1;
        self.v_out[a as usize] = h;
        Some(m)
    }

    /// Whether collapsing `h` (removing its source) keeps the mesh a
    /// manifold: interior edge and vertices, link condition, no valence-3
    /// opposite vertices, and more than four vertices left.
    pub fn can_collapse(&self, h: u32) -> bool {
        if !self.is_interior_edge(h) {
            return false;
        }
        let (a, b) = (self.from(h), self.to(h));
        if self.v_boundary[a as usize] || self.v_boundary[b as usize] {
            return false;
        }
        if self.live_vertex_count() <= 4 {
            return false;
        }
        let t = self.twin(h);
        let c = self.to(self.next(h));
        let d = self.to(self.next(t));
        if c == d {
            return false;
        }
        if self.v_boundary[c as usize] || self.v_boundary[d as usize] {
            return false;
        }
        if self.valence(c) <= 3 || self.valence(d) <= 3 {
            return false;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common = na.iter().filter(|x| nb.contains(x)).count();
        common == 2
    }

    /// Collapses `h` = a→b into b, moving b to `at`. Caller checks
    /// [`can_collapse`](Self::can_collapse). Returns the surviving vertex.
    pub fn collapse(&mut self, h: u32, at: Point3<f64>) -> u32 {
        let t = self.twin(h);
        let (h1, h2) = (self.next(h), self.prev(h));
        let (t1, t2) = (self.next(t), self.prev(t));
        let a = self.from(h);
        let b = self.to(h);
        let c = self.to(h1);
        let d = self.to(t1);
        let incoming: Vec<u32> = self.outgoing(a).into_iter().map(|o| self.twin(o)).collect();
        for i in incoming {
            self.he_to[i as usize] = b;
        }
        let (tw1, tw2) = (self.twin(h1), self.twin(h2));
        self.pair(tw1, tw2);
        let (ut1, ut2) = (self.twin(t1), self.twin(t2));
        self.pair(ut1, ut2);
        for e in [h, h1, h2, t, t1, t2] {
            self.he_dead[e as usize] = true;
        }
        let (f0, f1) = (self.face(h), self.face(t));
        self.f_dead[f0 as usize] = true;
        self.f_dead[f1 as usize] = true;
        self.v_dead[a as usize] = true;
        self.live_vertices -= 1;
        self.v_out[b as usize] = tw2;
        self.v_out[c as usize] = tw1;
        self.v_out[d as usize] = ut1;
        self.pos[b as usize] = at;
        b
    }

    /// Whether flipping `h` yields a valid (non-duplicate) edge.
    pub fn can_flip(&self, h: u32) -> bool {
        if !self.is_interior_edge(h) {
            return false;
        }
        let t = self.twin(h);
        let (a, b) = (self.from(h), self.to(h));
        let c = self.to(self.next(h));
        let d = self.to(self.next(t));
        if c == d || [a, b, c, d].iter().any(|&v| self.v_boundary[v as usize]) {
            return false;
        }
        if self.valence(a) <= 3 || self.valence(b) <= 3 {
            return false;
        }
        !self.neighbors(c).contains(&d)
    }

    /// Replaces edge a-b of the quad (a, d, b, c) by c-d.
    pub fn flip(&mut self, h: u32) {
        let t = self.twin(h);
        let (h1, h2) = (self.next(h), self.prev(h));
        let (t1, t2) = (self.next(t), self.prev(t));
        let a = self.from(h);
        let b = self.to(h);
        let c = self.to(h1);
        let d = self.to(t1);
        let (f0, f1) = (self.face(h), self.face(t));
        self.he_to[h as usize] = c; // d→c
        self.he_to[t as usize] = d; // c→d
        self.link(h, h2, t1, f0);
        self.link(t, t2, h1, f1);
        if self.v_out[a as usize] == h {
            self.v_out[a as usize] = t1;
        }
        if self.v_out[b as usize] == t {
            self.v_out[b as usize] = h1;
        }
    }

    /// Vertices opposite `h` and its twin.
    pub fn opposite(&self, h: u32) -> (u32, u32) {
        (self.to(self.next(h)), self.to(self.next(self.twin(h))))
    }

    /// Triangles around an interior vertex as (v, x, y) corner triples.
    pub fn fan(&self, v: u32) -> Vec<(u32, u32)> {
        self.outgoing(v)
            .into_iter()
            .map(|h| (self.to(h), self.to(self.next(h))))
            .collect()
    }

    /// Compacts live elements into an indexed mesh.
    pub fn to_trimesh(&self) -> TriMesh {
        let mut remap = vec![usize::MAX; self.pos.len()];
        let mut vertices = Vec::new();
        for (v, dead) in self.v_dead.iter().enumerate() {
            if !dead {
                remap[v] = vertices.len();
                vertices.push(self.pos[v]);
            }
        }
        let mut triangles = Vec::new();
        for (f, dead) in self.f_dead.iter().enumerate() {
            if *dead {
                continue;
            }
            let h = self.f_he[f];
            let a = self.to(self.prev(h));
            let b = self.to(h);
            let c = self.to(self.next(h));
            triangles.push([remap[a as usize], remap[b as usize], remap[c as usize]]);
        }
        TriMesh::new(vertices, triangles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::{icosphere, tetrahedron};

    #[test]
    fn roundtrip_preserves_mesh() {
        let m = icosphere(1.0, 2);
        let he = HalfEdgeMesh::from_trimesh(&m).unwrap();
        let back = he.to_trimesh();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles.len(), m.triangles.len());
        assert!(back.is_watertight());
    }

    #[test]
    fn valence_on_icosahedron() {
        let he = HalfEdgeMesh::from_trimesh(&icosphere(1.0, 0)).unwrap();
        for v in 0..12 {
            assert_eq!(he.valence(v), 5);
        }
    }

    #[test]
    fn split_flip_collapse_keep_closed() {
        let mut he = HalfEdgeMesh::from_trimesh(&icosphere(1.0, 1)).unwrap();
        let edges = he.edges();
        let h = edges[3];
        let mid = nalgebra::center(&he.pos[he.from(h) as usize], &he.pos[he.to(h) as usize]);
        let m = he.split(h, mid).unwrap();
        assert_eq!(he.valence(m), 4);
        let out = he.to_trimesh();
        assert!(out.is_watertight());
        assert_eq!(out.triangles.len(), 80 + 2);

        let h = he.edges()[10];
        if he.can_flip(h) {
            he.flip(h);
        }
        assert!(he.to_trimesh().is_watertight());

        let h = he.edges()[20];
        assert!(he.can_collapse(h));
        let at = he.pos[he.to(h) as usize];
        he.collapse(h, at);
        let out = he.to_trimesh();
        assert!(out.is_watertight());
        assert_eq!(out.triangles.len(), 80);
        assert_eq!(out.vertices.len(), 42);
    }

    #[test]
    fn tetrahedron_refuses_collapse() {
        let he = HalfEdgeMesh::from_trimesh(&tetrahedron()).unwrap();
        for h in he.edges() {
            assert!(!he.can_collapse(h));
            assert!(!he.can_flip(h));
        }
    }

    #[test]
    fn open_mesh_marks_boundary() {
        let mut m = icosphere(1.0, 1);
        m.triangles.pop();
        let he = HalfEdgeMesh::from_trimesh(&m).unwrap();
        assert_eq!(
            (0..he.vertex_count() as u32)
                .filter(|&v| he.is_boundary_vertex(v))
                .count(),
            3
        );
        let back = he.to_trimesh();
        assert_eq!(back.boundary_edge_count(), 3);
    }
}
