//! Surface comparison metrics.

use nalgebra::Point3;
use rayon::prelude::*;

use crate::geom::{TriMesh, TriangleBvh};

/// Vertices, triangle centroids and edge midpoints.
pub fn surface_samples(mesh: &TriMesh) -> Vec<Point3<f64>> {
    let mut out = mesh.vertices.clone();
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        out.push(Point3::from((a.coords + b.coords + c.coords) / 3.0));
    }
    for (a, b) in mesh.edges() {
        out.push(nalgebra::center(&mesh.vertices[a], &mesh.vertices[b]));
    }
    out
}

/// Distances from every sample of `from` to the surface of `to`.
pub fn one_sided_distances(from: &TriMesh, to: &TriMesh) -> Vec<f64> {
    let bvh = TriangleBvh::new(to);
    surface_samples(from).par_iter().map(|p| bvh.distance(p)).collect()
}

/// Symmetric mean point-to-surface distance.
pub fn chamfer(a: &TriMesh, b: &TriMesh) -> f64 {
    let mean = |d: Vec<f64>| d.iter().sum::<f64>() / d.len().max(1) as f64;
    0.5 * (mean(one_sided_distances(a, b)) + mean(one_sided_distances(b, a)))
}

/// Symmetric maximum point-to-surface distance over the sample sets.
pub fn hausdorff(a: &TriMesh, b: &TriMesh) -> f64 {
    let max = |d: Vec<f64>| d.into_iter().fold(0.0, f64::max);
    max(one_sided_distances(a, b)).max(max(one_sided_distances(b, a)))
}
