//! Indexed triangle meshes and the topology queries the pipeline relies on.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Indexed triangle surface in model space.
///
/// Triangles are counter-clockwise when seen from outside, so face normals
/// point away from the enclosed volume.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Checks index bounds and rejects triangles that repeat a vertex.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!("triangle {t} indexes past {n} vertices")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
        }
        if self.vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex".into()));
        }
        Ok(())
    }

    pub fn triangle(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal; its length is twice the triangle area.
    pub fn face_normal_raw(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.face_normal_raw(t).norm())
            .sum()
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    /// Area-weighted unit vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let n = self.face_normal_raw(t);
            for &v in tri {
                acc[v] += n;
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vector3::zeros()
                }
            })
            .collect()
    }

    pub fn with_normals(mut self) -> Self {
        self.normals = Some(self.vertex_normals());
        self
    }

    pub fn bounding_box(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))),
        )
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bounding_box().map(|(lo, hi)| (hi - lo).norm()).unwrap_or(0.0)
    }

    /// Undirected edges, each listed once as (lo, hi), sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .collect()
    }

    /// Number of undirected edges used by exactly one triangle.
    pub fn boundary_edge_count(&self) -> usize {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *count.entry((u.min(v), u.max(v))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c == 1).count()
    }

    /// Closed orientable 2-manifold check: every edge has exactly two
    /// incident triangles that traverse it in opposite directions.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *directed.entry((u, v)).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(u, v), &n)| n == 1 && directed.get(&(v, u)) == Some(&1))
    }

    /// Vertex adjacency lists (sorted, deduplicated).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Connected components over triangles sharing a vertex.
    pub fn connected_components(&self) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c)] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru.max(rv)] = ru.min(rv);
                }
            }
        }
        let mut used = vec![false; n];
        for tri in &self.triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        let mut roots: Vec<usize> = (0..n).filter(|&v| used[v]).map(|v| find(&mut parent, v)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Drops vertices no triangle references, preserving order.
    pub fn compact(&mut self) {
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if used.iter().all(|&u| u) {
            return;
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut verts = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if used[i] {
                remap[i] = verts.len();
                verts.push(*v);
            }
        }
        if let Some(normals) = &mut self.normals {
            *normals = normals
                .iter()
                .enumerate()
                .filter(|(i, _)| used[*i])
                .map(|(_, n)| *n)
                .collect();
        }
        self.vertices = verts;
        for tri in &mut self.triangles {
            for v in tri.iter_mut() {
                *v = remap[*v];
            }
        }
    }

    pub fn transformed(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        TriMesh::new(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    /// Concatenates meshes without welding.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TriMesh>) -> TriMesh {
        let mut out = TriMesh::default();
        for m in meshes {
            let base = out.vertices.len();
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        out
    }

    /// Writes ASCII OBJ (`v` and `f` records, 1-based indices). Coordinates
    /// use the shortest representation that parses back to the same bits.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidMesh("cannot export an empty mesh".into()));
        }
        let mut buf = String::with_capacity(self.vertices.len() * 48);
        for v in &self.vertices {
            let _ = writeln!(buf, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(buf, "f {} {} {}", a + 1, b + 1, c + 1);
        }
        w.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn to_obj_string(&self) -> Result<String> {
        let mut out = Vec::new();
        self.write_obj(&mut out)?;
        Ok(String::from_utf8(out).expect("OBJ output is ASCII"))
    }

    /// Reads `v` and `f` records; polygon faces are fan-triangulated and
    /// `f` tokens may carry `/vt/vn` suffixes.
    pub fn read_obj<R: Read>(r: R) -> Result<TriMesh> {
        let mut mesh = TriMesh::default();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let mut it = line.split_whitespace();
            let parse_err = |msg: &str| Error::Parse {
                line: lineno + 1,
                column: 1,
                message: msg.to_string(),
            };
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_err("bad vertex coordinate"))?;
                    if c.len() != 3 {
                        return Err(parse_err("vertex needs 3 coordinates"));
                    }
                    mesh.vertices.push(Point3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = it
                        .map(|s| {
                            s.split('/')
                                .next()
                                .and_then(|i| i.parse::<i64>().ok())
                                .ok_or_else(|| parse_err("bad face index"))
                                .and_then(|i| {
                                    let n = mesh.vertices.len() as i64;
                                    let k = if i < 0 { n + i } else { i - 1 };
                                    if k < 0 || k >= n {
                                        Err(parse_err("face index out of range"))
                                    } else {
                                        Ok(k as usize)
                                    }
                                })
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() < 3 {
                        return Err(parse_err("face needs at least 3 vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(mesh)
    }
}

/// Regular icosahedron inscribed in a sphere of the given radius.
pub fn icosahedron(radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw
        .iter()
        .map(|&[x, y, z]| Point3::from(Vector3::new(x, y, z).normalize() * radius))
        .collect();
    let triangles = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh::new(vertices, triangles)
}

/// Icosphere: `levels` rounds of 1→4 subdivision with vertices pushed back
/// onto the sphere.
pub fn icosphere(radius: f64, levels: usize) -> TriMesh {
    let mut mesh = icosahedron(radius);
    for _ in 0..levels {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut tris = Vec::with_capacity(mesh.triangles.len() * 4);
        let mut verts = mesh.vertices.clone();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Point3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (verts[a].coords + verts[b].coords).normalize() * radius;
                verts.push(Point3::from(m));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &mesh.triangles {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            tris.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        mesh = TriMesh::new(verts, tris);
    }
    mesh
}

/// Regular tetrahedron with outward winding.
pub fn tetrahedron() -> TriMesh {
    TriMesh::new(
        vec![
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Axis-aligned box with outward winding.
pub fn cuboid(min: Point3<f64>, max: Point3<f64>) -> TriMesh {
    let c = |i: usize| {
        Point3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(c).collect();
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let triangles = quads.iter().flat_map(|&[a, b, c, d]| [[a, b, c], [a, c, d]]).collect();
    TriMesh::new(vertices, triangles)
}
