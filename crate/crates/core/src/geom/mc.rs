//! Marching cubes isosurface extraction.
//!
//! Instead of a 256-entry triangle table, each cube's polygons are assembled
//! from the iso-segments on its six faces. A face's segments depend only on
//! its four corner values (ambiguous faces are resolved with the asymptotic
//! decider), so the two cubes sharing a face always agree and the output is
//! a closed, consistently oriented 2-manifold. Samples outside the lattice
//! are treated as outside, which closes surfaces that touch the bounds.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::field::{Aabb, GridField, ScalarField};
use super::mesh::TriMesh;

/// Crossing parameters are kept this far from lattice points so that no two
/// output vertices coincide.
const T_GUARD: f64 = 1e-3;

/// Lattice edge key with its crossing position.
type KeyedPoint = (u64, Point3<f64>);

/// Cell diagonals around the surface within which lattice values are exact.
const BAND_CELLS: f64 = 4.0;

/// Extracts the zero set of `field` on a `resolution³`-cell lattice over
/// `bounds`. Triangles face toward decreasing field values (outward).
/// A field with uniform sign yields an empty mesh.
pub fn marching_cubes<F: ScalarField + ?Sized>(field: &F, resolution: usize, bounds: Aabb) -> TriMesh {
    assert!(resolution >= 1, "resolution must be positive");
    let n = resolution + 1;
    let step = bounds.extent() / resolution as f64;
    let mut values = vec![0.0; n * n * n];
    // Only values next to a sign change shape the surface.
    let band = vec![BAND_CELLS * step.norm(); n];
    values.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
        for (j, row) in slab.chunks_mut(n).enumerate() {
            let origin = bounds.min + Vector3::new(0.0, j as f64 * step.y, k as f64 * step.z);
            field.sample_row(&origin, step.x, &band, row);
        }
    });
    extract(&values, resolution, bounds.min, step)
}

/// Extracts the zero set directly from a grid's stored lattice values.
pub fn marching_cubes_grid(grid: &GridField) -> TriMesh {
    extract(
        &grid.values,
        grid.resolution,
        grid.origin,
        Vector3::repeat(grid.spacing),
    )
}

struct Lattice<'a> {
    values: &'a [f64],
    n: usize,
    pad: f64,
    origin: Point3<f64>,
    step: Vector3<f64>,
}

impl Lattice<'_> {
    /// Value at padded index (0 and n+1 are the virtual outside layer).
    #[inline]
    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        if i == 0 || j == 0 || k == 0 || i > n || j > n || k > n {
            self.pad
        } else {
            self.values[((k - 1) * n + (j - 1)) * n + (i - 1)]
        }
    }

    #[inline]
    fn position(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        self.origin
            + Vector3::new(
                (i as f64 - 1.0) * self.step.x,
                (j as f64 - 1.0) * self.step.y,
                (k as f64 - 1.0) * self.step.z,
            )
    }
}

// Corner c of a cube sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
const fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The six faces as (axis, side, corners in cyclic order).
fn faces() -> [(usize, usize, [usize; 4]); 6] {
    let mut out = [(0, 0, [0; 4]); 6];
    let mut idx = 0;
    for axis in 0..3 {
        let (u, v) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for side in 0..2 {
            let base = side << axis;
            let cyc = [base, base | (1 << u), base | (1 << u) | (1 << v), base | (1 << v)];
            out[idx] = (axis, side, cyc);
            idx += 1;
        }
    }
    out
}

fn extract(values: &[f64], resolution: usize, origin: Point3<f64>, step: Vector3<f64>) -> TriMesh {
    let n = resolution + 1;
    let lat = Lattice {
        values,
        n,
        pad: -step.min().max(f64::MIN_POSITIVE),
        origin,
        step,
    };
    let np = n + 2; // padded points per axis
    let faces = faces();

    // Per z-slab: triangles as triples of edge keys, and key → position.
    let slabs: Vec<(Vec<[u64; 3]>, Vec<KeyedPoint>)> = (0..np - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            let mut verts = Vec::new();
            for j in 0..np - 1 {
                for i in 0..np - 1 {
                    let mut vals = [0.0; 8];
                    let mut mask = 0u8;
                    for (c, val) in vals.iter_mut().enumerate() {
                        let [dx, dy, dz] = corner_offset(c);
                        *val = lat.value(i + dx, j + dy, k + dz);
                        if *val > 0.0 {
                            mask |= 1 << c;
                        }
                    }
                    if mask == 0 || mask == 0xff {
                        continue;
                    }
                    polygonize_cube(&lat, [i, j, k], &vals, mask, &faces, np, &mut tris, &mut verts);
                }
            }
            (tris, verts)
        })
        .collect();

    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut mesh = TriMesh::default();
    for (tris, verts) in slabs {
        for (key, p) in verts {
            index.entry(key).or_insert_with(|| {
                mesh.vertices.push(p);
                mesh.vertices.len() - 1
            });
        }
        for t in tris {
            mesh.triangles.push(t.map(|key| index[&key]));
        }
    }
    mesh
}

#[allow(clippy::too_many_arguments)]
fn polygonize_cube(
    lat: &Lattice<'_>,
    cell: [usize; 3],
    vals: &[f64; 8],
    mask: u8,
    faces: &[(usize, usize, [usize; 4]); 6],
    np: usize,
    tris: &mut Vec<[u64; 3]>,
    verts: &mut Vec<(u64, Point3<f64>)>,
) {
    let inside = |c: usize| mask & (1 << c) != 0;
    let corner_pos = |c: usize| {
        let [dx, dy, dz] = corner_offset(c);
        lat.position(cell[0] + dx, cell[1] + dy, cell[2] + dz)
    };
    // Crossing on the cube edge between corners a and b (differing in one bit).
    let crossing = |a: usize, b: usize| -> (u64, Point3<f64>) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let axis = (lo ^ hi).trailing_zeros() as u64;
        let [dx, dy, dz] = corner_offset(lo);
        let (gi, gj, gk) = ((cell[0] + dx) as u64, (cell[1] + dy) as u64, (cell[2] + dz) as u64);
        let np = np as u64;
        let key = ((gk * np + gj) * np + gi) * 3 + axis;
        let (vl, vh) = (vals[lo], vals[hi]);
        let t = (vl / (vl - vh)).clamp(T_GUARD, 1.0 - T_GUARD);
        let (pl, ph) = (corner_pos(lo), corner_pos(hi));
        (key, pl + (ph - pl) * t)
    };

    // Directed segments (start, end) with positions.
    let mut segs: Vec<(KeyedPoint, KeyedPoint)> = Vec::with_capacity(8);
    for &(axis, side, cyc) in faces {
        let flags = cyc.map(inside);
        let crossings: Vec<usize> = (0..4).filter(|&e| flags[e] != flags[(e + 1) % 4]).collect();
        let mut normal = Vector3::zeros();
        normal[axis] = if side == 1 { 1.0 } else { -1.0 };
        // Each pair: (edge index p, edge index q, reference corner cyc index).
        let mut pairs: [(usize, usize, usize); 2] = [(0, 0, 0); 2];
        let count = match crossings.len() {
            0 => 0,
            2 => {
                pairs[0] = (crossings[0], crossings[1], (crossings[0] + 1) % 4);
                1
            }
            4 => {
                let [a, b, c, d] = cyc.map(|k| vals[k]);
                let saddle = (a * c - b * d) / (a + c - b - d);
                // Corners 0 and 2 share a class, as do 1 and 3.
                let class02_inside = flags[0];
                let saddle_inside = saddle > 0.0;
                if saddle_inside == class02_inside {
                    // Corners 0 and 2 connect across the face: cut off 1 and 3.
                    pairs[0] = (0, 1, 1);
                    pairs[1] = (2, 3, 3);
                } else {
                    pairs[0] = (3, 0, 0);
                    pairs[1] = (1, 2, 2);
                }
                2
            }
            _ => unreachable!("a face has an even number of sign changes"),
        };
        for &(p, q, refc) in &pairs[..count] {
            let a = crossing(cyc[p], cyc[(p + 1) % 4]);
            let b = crossing(cyc[q], cyc[(q + 1) % 4]);
            let corner = corner_pos(cyc[refc]);
            let s = normal.cross(&(b.1 - a.1)).dot(&(corner - a.1));
            // Outside corners must lie on the positive side.
            let forward = (s > 0.0) != flags[refc];
            segs.push(if forward { (a, b) } else { (b, a) });
        }
    }

    // Chain segments into loops and fan-triangulate.
    let mut used = vec![false; segs.len()];
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        let mut ring: Vec<(u64, Point3<f64>)> = Vec::with_capacity(12);
        let mut cur = start;
        loop {
            used[cur] = true;
            ring.push(segs[cur].0);
            let end = segs[cur].1 .0;
            match (0..segs.len()).find(|&s| !used[s] && segs[s].0 .0 == end) {
                Some(next) => cur = next,
                None => break,
            }
        }
        debug_assert!(ring.len() >= 3);
        if ring.len() < 3 {
            continue;
        }
        for v in &ring {
            verts.push(*v);
        }
        for i in 1..ring.len() - 1 {
            tris.push([ring[0].0, ring[i].0, ring[i + 1].0]);
        }
    }
}
