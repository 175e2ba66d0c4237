use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{ScalarField, TriMesh};

/// Halvings a flipping vertex gets before it is frozen.
pub const MAX_HALVINGS: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    /// Vertices whose step hit the clamp.
    pub clamped: usize,
    /// Vertices that took at least one half step.
    pub halved: usize,
    /// Vertices left in place by the flip guard.
    pub frozen: usize,
    pub mean_abs_before: f64,
    pub max_abs_before: f64,
}

/// One pass of v′ = v + clamp(g(v), ±λ)·n with area-weighted outward normals.
///
/// λ = `clamp_voxels` lattice spacings when the field is grid-backed and
/// unbounded for analytic fields. Vertices of any triangle whose normal
/// turns by more than 90° retry with half steps, then stay put.
pub fn implicit_update(mesh: &TriMesh, field: &dyn ScalarField, clamp_voxels: f64) -> (TriMesh, UpdateStats) {
    implicit_update_along(mesh, field, clamp_voxels, &mesh.vertex_normals())
}

/// Outward unit normals −∇g/|∇g| of the field at the vertices.
pub fn field_normals(mesh: &TriMesh, field: &dyn ScalarField) -> Vec<Vector3<f64>> {
    mesh.vertices
        .par_iter()
        .map(|v| {
            let g = -field.gradient(v);
            let len = g.norm();
            if len > 0.0 {
                g / len
            } else {
                Vector3::zeros()
            }
        })
        .collect()
}

/// [`implicit_update`] along caller-supplied unit normals.
pub fn implicit_update_along(
    mesh: &TriMesh,
    field: &dyn ScalarField,
    clamp_voxels: f64,
    normals: &[Vector3<f64>],
) -> (TriMesh, UpdateStats) {
    let limit = field.voxel_size().map(|h| clamp_voxels * h);
    let values: Vec<f64> = mesh.vertices.par_iter().map(|v| field.sample(v)).collect();
    let mut stats = UpdateStats::default();
    let steps: Vec<Vector3<f64>> = values
        .iter()
        .zip(normals)
        .map(|(&g, n)| {
            let s = match limit {
                Some(l) if g.abs() > l => {
                    stats.clamped += 1;
                    g.signum() * l
                }
                _ => g,
            };
            if s.is_finite() {
                n * s
            } else {
                Vector3::zeros()
            }
        })
        .collect();
    if !values.is_empty() {
        stats.mean_abs_before = values.iter().map(|g| g.abs()).sum::<f64>() / values.len() as f64;
        stats.max_abs_before = values.iter().fold(0.0, |m, g| m.max(g.abs()));
    }

    let old: Vec<Vector3<f64>> = (0..mesh.triangles.len()).map(|t| mesh.face_normal_raw(t)).collect();
    let mut scale = vec![1.0f64; mesh.vertices.len()];
    let mut halvings = vec![0usize; mesh.vertices.len()];
    let mut out = mesh.clone();
    loop {
        for (k, p) in out.vertices.iter_mut().enumerate() {
            *p = mesh.vertices[k] + steps[k] * scale[k];
        }
        let flipped = flipped_vertices(&out, &old);
        if flipped.is_empty() {
            break;
        }
        for v in flipped {
            if halvings[v] < MAX_HALVINGS {
                halvings[v] += 1;
                scale[v] *= 0.5;
            } else {
                scale[v] = 0.0;
            }
        }
    }
    stats.halved = halvings.iter().filter(|h| **h > 0).count();
    stats.frozen = scale
        .iter()
        .zip(&steps)
        .filter(|(s, d)| **s == 0.0 && d.norm() > 0.0)
        .count();
    (out.with_normals(), stats)
}

/// Vertices of triangles whose normal turned by more than 90°.
fn flipped_vertices(mesh: &TriMesh, old: &[Vector3<f64>]) -> Vec<usize> {
    let mut mark = vec![false; mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.face_normal_raw(t).dot(&old[t]) < 0.0 {
            for &v in tri {
                mark[v] = true;
            }
        }
    }
    (0..mark.len()).filter(|&v| mark[v]).collect()
}

/// Repeats [`implicit_update`] `iterations` times.
pub fn implicit_iterations(
    mesh: &TriMesh,
    field: &dyn ScalarField,
    clamp_voxels: f64,
    iterations: usize,
) -> (TriMesh, UpdateStats) {
    let mut cur = mesh.clone();
    let mut first = None;
    for _ in 0..iterations {
        let (next, s) = implicit_update(&cur, field, clamp_voxels);
        first.get_or_insert(s);
        cur = next;
    }
    (cur, first.unwrap_or_default())
}

/// Mean |g| over the vertices.
pub fn mean_abs_field(mesh: &TriMesh, field: &dyn ScalarField) -> f64 {
    if mesh.vertices.is_empty() {
        return 0.0;
    }
    mesh.vertices
        .par_iter()
        .map(|v: &Point3<f64>| field.sample(v).abs())
        .sum::<f64>()
        / mesh.vertices.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::field::{EllipsoidField, SphereField};
    use crate::geom::mesh::{cuboid, icosphere};
    use crate::geom::mesh_to_field;

    #[test]
    fn sphere_lands_on_zero_set() {
        let m = icosphere(1.2, 4);
        let field = SphereField::new(Point3::origin(), 1.0);
        let (out, stats) = implicit_update_along(&m, &field, 2.0, &field_normals(&m, &field));
        assert_eq!(stats.clamped, 0);
        for v in &out.vertices {
            assert!((v.coords.norm() - 1.0).abs() < 1e-6);
        }
        // Area-weighted normals are only close to radial.
        let (out, _) = implicit_update(&m, &field, 2.0);
        for v in &out.vertices {
            assert!((v.coords.norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_set_is_fixed() {
        let m = icosphere(1.0, 3);
        let field = SphereField::new(Point3::origin(), 1.0);
        let (out, _) = implicit_update(&m, &field, 2.0);
        for (a, b) in m.vertices.iter().zip(&out.vertices) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn ellipsoid_residual_halves() {
        let m = icosphere(0.6, 4);
        let field = EllipsoidField::new(Point3::origin(), Vector3::new(0.7, 0.6, 0.5));
        let before = mean_abs_field(&m, &field);
        let (out, _) = implicit_update(&m, &field, 2.0);
        assert!(mean_abs_field(&out, &field) <= 0.5 * before);
    }

    #[test]
    fn grid_fields_clamp_the_step() {
        let m = icosphere(0.4, 3);
        let grid = mesh_to_field(&icosphere(0.8, 3), 32).unwrap();
        let h = grid.spacing;
        let (out, stats) = implicit_update(&m, &grid, 2.0);
        assert_eq!(stats.clamped, m.vertices.len());
        for (a, b) in m.vertices.iter().zip(&out.vertices) {
            assert!(((b - a).norm() - 2.0 * h).abs() < 1e-9);
        }
    }

    /// Field that pushes a single vertex straight through the mesh.
    struct Spike(Point3<f64>);

    impl ScalarField for Spike {
        fn sample(&self, p: &Point3<f64>) -> f64 {
            if (p - self.0).norm() < 1e-9 {
                -20.0
            } else {
                0.0
            }
        }
    }

    #[test]
    fn flip_guard_freezes_the_offender() {
        // A radial move cannot flip a vertex's own fan; a cube corner moving
        // along its diagonal normal crosses the adjacent faces.
        let m = cuboid(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        let corner = (0..m.vertices.len())
            .find(|&k| m.vertices[k] == Point3::new(0.5, 0.5, 0.5))
            .unwrap();
        let (out, stats) = implicit_update(&m, &Spike(m.vertices[corner]), 2.0);
        assert!(stats.frozen >= 1);
        for t in 0..out.triangles.len() {
            assert!(out.face_normal_raw(t).dot(&m.face_normal_raw(t)) >= 0.0);
        }
    }
}
