//! Mesh → signed distance lattice conversion.
//!
//! Two evaluation strategies for the same lattice contract (value at a
//! lattice point = sign × distance to the surface, sign from the generalized
//! winding number):
//!
//! * [`mesh_to_field`] fills a dense [`GridField`]. Distances are exact
//!   within `BAND_VOXELS` of the surface (per-triangle scan) and beyond it
//!   come from closest-point propagation, which always reports the distance
//!   to a real surface point and is exact except in rare medial-axis cases.
//!   Signs come from one winding-number query per connected region of
//!   lattice points that cannot straddle the surface, plus one per
//!   near-surface point.
//! * [`LazyMeshField`] computes each lattice value exactly (BVH distance and
//!   winding number) the first time a cell touching it is sampled. Deforming
//!   a mesh only touches cells near the surface; extracting an isosurface
//!   touches all of them.
//!
//! [`ExactMeshField`] skips the lattice and answers every query exactly.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Point3, Vector3};

use super::bvh::{closest_point_on_triangle, TriangleBvh};
use super::field::{cell_coords, trilerp, Aabb, GridField, ScalarField};
use super::mesh::TriMesh;
use crate::error::{Error, Result};

const BAND_VOXELS: f64 = 2.0;

fn require_closed(mesh: &TriMesh) -> Result<()> {
    mesh.validate()?;
    let boundary_edges = mesh.boundary_edge_count();
    if boundary_edges > 0 || mesh.is_empty() {
        return Err(Error::OpenMesh { boundary_edges });
    }
    Ok(())
}

/// Dense signed distance lattice over the model box [-1, 1]³.
pub fn mesh_to_field(mesh: &TriMesh, resolution: usize) -> Result<GridField> {
    mesh_to_field_in(mesh, resolution, Aabb::unit())
}

/// Dense signed distance lattice over a cubic `bounds`.
pub fn mesh_to_field_in(mesh: &TriMesh, resolution: usize, bounds: Aabb) -> Result<GridField> {
    require_closed(mesh)?;
    let mut grid = GridField::lattice(resolution, bounds);
    let n = grid.points_per_axis();
    let h = grid.spacing;
    let total = n * n * n;
    let mut dist = vec![f64::INFINITY; total];
    let mut closest = vec![Point3::origin(); total];

    // Exact distances in a band around every triangle.
    let band = BAND_VOXELS * h;
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangle(t);
        let lo = tri[0].inf(&tri[1]).inf(&tri[2]);
        let hi = tri[0].sup(&tri[1]).sup(&tri[2]);
        let range = |a: usize| {
            let from = ((lo[a] - band - grid.origin[a]) / h).ceil().max(0.0) as usize;
            let to = (((hi[a] + band - grid.origin[a]) / h).floor().max(-1.0) + 1.0) as usize;
            from..to.min(n)
        };
        let (ri, rj, rk) = (range(0), range(1), range(2));
        for k in rk.clone() {
            for j in rj.clone() {
                for i in ri.clone() {
                    let p = grid.point(i, j, k);
                    let q = closest_point_on_triangle(&p, &tri);
                    let d = (q - p).norm();
                    let idx = grid.index(i, j, k);
                    if d < dist[idx] {
                        dist[idx] = d;
                        closest[idx] = q;
                    }
                }
            }
        }
    }

    // Closest-point propagation: forward and backward raster passes over
    // the 26-neighborhood, twice.
    let offsets: Vec<(isize, isize, isize)> = (-1..=1)
        .flat_map(|dk| (-1..=1).flat_map(move |dj| (-1..=1).map(move |di| (di, dj, dk))))
        .filter(|&(di, dj, dk)| (dk, dj, di) < (0, 0, 0))
        .collect();
    let ni = n as isize;
    for _round in 0..2 {
        for backward in [false, true] {
            let sign = if backward { -1 } else { 1 };
            for kk in 0..ni {
                let k = if backward { ni - 1 - kk } else { kk };
                for jj in 0..ni {
                    let j = if backward { ni - 1 - jj } else { jj };
                    for ii in 0..ni {
                        let i = if backward { ni - 1 - ii } else { ii };
                        let idx = grid.index(i as usize, j as usize, k as usize);
                        let p = grid.point(i as usize, j as usize, k as usize);
                        for &(di, dj, dk) in &offsets {
                            let (a, b, c) = (i + sign * di, j + sign * dj, k + sign * dk);
                            if a < 0 || b < 0 || c < 0 || a >= ni || b >= ni || c >= ni {
                                continue;
                            }
                            let nidx = grid.index(a as usize, b as usize, c as usize);
                            if !dist[nidx].is_finite() {
                                continue;
                            }
                            let q = closest[nidx];
                            let d = (q - p).norm();
                            if d < dist[idx] {
                                dist[idx] = d;
                                closest[idx] = q;
                            }
                        }
                    }
                }
            }
        }
    }

    // Signs. Two 6-neighbors whose distances both exceed h/2 cannot lie on
    // opposite sides of the surface, so such links carry the sign.
    let bvh = TriangleBvh::new(mesh);
    let safe = 0.5 * h;
    let mut parent: Vec<u32> = (0..total as u32).collect();
    fn find(p: &mut [u32], mut x: u32) -> u32 {
        while p[x as usize] != x {
            let up = p[p[x as usize] as usize];
            p[x as usize] = up;
            x = up;
        }
        x
    }
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = grid.index(i, j, k);
                if dist[idx] <= safe {
                    continue;
                }
                for (a, b, c) in [(i + 1, j, k), (i, j + 1, k), (i, j, k + 1)] {
                    if a >= n || b >= n || c >= n {
                        continue;
                    }
                    let nidx = grid.index(a, b, c);
                    if dist[nidx] > safe {
                        let (ra, rb) = (find(&mut parent, idx as u32), find(&mut parent, nidx as u32));
                        if ra != rb {
                            parent[ra.max(rb) as usize] = ra.min(rb);
                        }
                    }
                }
            }
        }
    }
    let mut root_sign: std::collections::HashMap<u32, f64> = std::collections::HashMap::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = grid.index(i, j, k);
                let p = grid.point(i, j, k);
                let s = if dist[idx] <= safe {
                    if bvh.is_inside(&p) {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    let root = find(&mut parent, idx as u32);
                    *root_sign
                        .entry(root)
                        .or_insert_with(|| if bvh.is_inside(&p) { 1.0 } else { -1.0 })
                };
                grid.values[idx] = s * dist[idx];
            }
        }
    }
    Ok(grid)
}

/// Signed distance lattice whose values are computed exactly on first use.
pub struct LazyMeshField {
    bvh: TriangleBvh,
    resolution: usize,
    origin: Point3<f64>,
    spacing: f64,
    cache: Vec<AtomicU64>,
}

/// Bit pattern marking a lattice value that has not been computed yet.
const UNSET: u64 = u64::MAX;

impl LazyMeshField {
    /// Lattice of `resolution³` cells over [-1, 1]³.
    pub fn new(mesh: &TriMesh, resolution: usize) -> Result<Self> {
        Self::new_in(mesh, resolution, Aabb::unit())
    }

    pub fn new_in(mesh: &TriMesh, resolution: usize, bounds: Aabb) -> Result<Self> {
        require_closed(mesh)?;
        let n = resolution + 1;
        Ok(Self {
            bvh: TriangleBvh::new(mesh),
            resolution,
            origin: bounds.min,
            spacing: bounds.extent().max() / resolution as f64,
            cache: (0..n * n * n).map(|_| AtomicU64::new(UNSET)).collect(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of lattice values computed so far.
    pub fn evaluated(&self) -> usize {
        self.cache.iter().filter(|v| v.load(Ordering::Relaxed) != UNSET).count()
    }

    #[inline]
    fn lattice_value(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.resolution + 1;
        let slot = &self.cache[(k * n + j) * n + i];
        let bits = slot.load(Ordering::Relaxed);
        if bits != UNSET {
            return f64::from_bits(bits);
        }
        let p = self.origin + Vector3::new(i as f64, j as f64, k as f64) * self.spacing;
        let v = self.bvh.signed_distance(&p);
        // Racing writers store identical values.
        slot.store(v.to_bits(), Ordering::Relaxed);
        v
    }

    /// Forces every lattice value and returns the dense grid.
    pub fn to_grid(&self) -> GridField {
        let mut g = GridField::lattice(
            self.resolution,
            Aabb::new(
                self.origin,
                self.origin + Vector3::repeat(self.spacing * self.resolution as f64),
            ),
        );
        let n = self.resolution + 1;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    g.values[(k * n + j) * n + i] = self.lattice_value(i, j, k);
                }
            }
        }
        g
    }
}

impl ScalarField for LazyMeshField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        let ([i, j, k], f) = cell_coords(&self.origin, self.spacing, self.resolution, p);
        let c = [
            self.lattice_value(i, j, k),
            self.lattice_value(i + 1, j, k),
            self.lattice_value(i, j + 1, k),
            self.lattice_value(i + 1, j + 1, k),
            self.lattice_value(i, j, k + 1),
            self.lattice_value(i + 1, j, k + 1),
            self.lattice_value(i, j + 1, k + 1),
            self.lattice_value(i + 1, j + 1, k + 1),
        ];
        trilerp(c, f)
    }

    fn voxel_size(&self) -> Option<f64> {
        Some(self.spacing)
    }
}

/// Signed distance to a closed mesh evaluated exactly at every query, with
/// the closest-point direction as gradient. Reports the spacing of a
/// `resolution³` lattice over [-1, 1]³ as its voxel size.
pub struct ExactMeshField {
    bvh: TriangleBvh,
    normals: Vec<Vector3<f64>>,
    spacing: f64,
}

impl ExactMeshField {
    pub fn new(mesh: &TriMesh, resolution: usize) -> Result<Self> {
        require_closed(mesh)?;
        let normals = (0..mesh.triangles.len())
            .map(|t| {
                mesh.face_normal_raw(t)
                    .try_normalize(0.0)
                    .unwrap_or_else(Vector3::zeros)
            })
            .collect();
        Ok(Self {
            bvh: TriangleBvh::new(mesh),
            normals,
            spacing: 2.0 / resolution as f64,
        })
    }
}

impl ScalarField for ExactMeshField {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        self.bvh.signed_distance(p)
    }

    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        let Some(c) = self.bvh.closest(p) else {
            return Vector3::zeros();
        };
        let d = c.distance_sq.sqrt();
        if d < 1e-12 {
            return -self.normals[c.triangle];
        }
        let away = (p - c.point) / d;
        if self.bvh.is_inside(p) {
            away
        } else {
            -away
        }
    }

    fn voxel_size(&self) -> Option<f64> {
        Some(self.spacing)
    }

    /// Distance is 1-Lipschitz, so after a query at distance `d` the next
    /// `(d - band) / step` points are known to lie beyond the band and keep
    /// the sign; the winding number is only consulted where the surface may
    /// pass between neighbours.
    fn sample_row(&self, origin: &Point3<f64>, step: f64, band: &[f64], out: &mut [f64]) {
        let step_abs = step.abs();
        let mut lower = f64::NEG_INFINITY;
        let mut prev: Option<(f64, f64)> = None;
        let mut hint = None;
        for (i, o) in out.iter_mut().enumerate() {
            if let Some((_, sign)) = prev {
                if lower > band[i] {
                    *o = sign * lower;
                    prev = Some((lower, sign));
                    lower -= step_abs;
                    continue;
                }
            }
            let p = origin + Vector3::new(i as f64 * step, 0.0, 0.0);
            let Some(c) = self.bvh.closest_with_hint(&p, hint) else {
                *o = f64::NEG_INFINITY;
                continue;
            };
            hint = Some(c.triangle);
            let d = c.distance_sq.sqrt();
            let sign = match prev {
                Some((pd, ps)) if pd + d > step_abs => ps,
                _ => {
                    if self.bvh.is_inside(&p) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            *o = sign * d;
            prev = Some((d, sign));
            lower = d - step_abs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mc::marching_cubes_grid;
    use crate::geom::mesh::{cuboid, icosphere};

    #[test]
    fn cube_center_value() {
        let cube = cuboid(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        let g = mesh_to_field(&cube, 64).unwrap();
        let c = g.sample(&Point3::origin());
        assert!((c - 0.5).abs() <= g.spacing, "center {c}");
        // Far corner of the lattice is outside.
        assert!(g.at(0, 0, 0) < 0.0);
    }

    #[test]
    fn rejects_open_mesh() {
        let mut m = icosphere(0.5, 1);
        m.triangles.pop();
        assert!(matches!(mesh_to_field(&m, 16), Err(Error::OpenMesh { .. })));
        assert!(LazyMeshField::new(&m, 16).is_err());
    }

    #[test]
    fn dense_matches_lazy_exact_values() {
        let m = icosphere(0.55, 3).transformed(|p| Point3::new(p.x * 1.2, p.y, p.z * 0.8));
        let dense = mesh_to_field(&m, 24).unwrap();
        let exact = LazyMeshField::new(&m, 24).unwrap().to_grid();
        let h = dense.spacing;
        let mut worst: f64 = 0.0;
        for (a, b) in dense.values.iter().zip(&exact.values) {
            assert_eq!(a.signum(), b.signum());
            // Propagated distances are upper bounds on the exact distance.
            assert!(*a * a.signum() >= *b * b.signum() - 1e-12);
            if b.abs() <= BAND_VOXELS * h {
                assert!((a - b).abs() < 1e-12, "band {a} vs {b}");
            }
            worst = f64::max(worst, (a - b).abs());
        }
        assert!(worst < 0.1 * h, "worst {worst}");
    }

    #[test]
    fn exact_field_on_sphere() {
        let m = icosphere(0.5, 4);
        let f = ExactMeshField::new(&m, 64).unwrap();
        assert_eq!(f.voxel_size(), Some(2.0 / 64.0));
        for v in &m.vertices {
            assert_eq!(f.sample(v), 0.0);
            assert!((f.gradient(v) + v.coords.normalize()).norm() < 0.05);
        }
        let p = Point3::new(0.0, 0.0, 0.8);
        assert!((f.sample(&p) + 0.3).abs() < 0.01);
        assert!((f.gradient(&p) - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        assert!(f.sample(&Point3::origin()) > 0.45);
    }

    #[test]
    fn lazy_field_evaluates_only_touched_cells() {
        let m = icosphere(0.5, 2);
        let f = LazyMeshField::new(&m, 32).unwrap();
        assert_eq!(f.evaluated(), 0);
        let v = f.sample(&Point3::new(0.5, 0.0, 0.0));
        assert!(v.abs() < f.spacing);
        assert_eq!(f.evaluated(), 8);
    }

    #[test]
    fn roundtrip_through_marching_cubes() {
        let m = icosphere(0.5, 3);
        let g = mesh_to_field(&m, 64).unwrap();
        let back = marching_cubes_grid(&g);
        let bvh_in = TriangleBvh::new(&m);
        let bvh_out = TriangleBvh::new(&back);
        let h1 = back.vertices.iter().map(|v| bvh_in.distance(v)).fold(0.0, f64::max);
        let h2 = m.vertices.iter().map(|v| bvh_out.distance(v)).fold(0.0, f64::max);
        assert!(h1.max(h2) <= 2.0 * g.spacing, "hausdorff {}", h1.max(h2));
    }
}
