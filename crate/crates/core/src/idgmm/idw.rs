use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::Point3;
use rayon::prelude::*;

use super::config::IdwParams;
use crate::geom::TriMesh;
use crate::raster::PointCloud;

/// k-d tree over a point cloud.
pub struct CloudIndex<'a> {
    points: &'a [Point3<f64>],
    tree: ImmutableKdTree<f64, 3>,
}

impl<'a> CloudIndex<'a> {
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            points,
            tree: ImmutableKdTree::new_from_slice(&coords),
        }
    }

    /// Weighted target for `v`, or `None` when no point lies within the
    /// search radius.
    pub fn interpolate(&self, v: &Point3<f64>, params: &IdwParams) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let q = [v.x, v.y, v.z];
        let nearest = self.tree.nearest_one::<SquaredEuclidean>(&q);
        if (v - self.points[nearest.item as usize]).norm() > params.radius {
            return None;
        }
        let k = NonZero::new(params.neighbors.max(1)).unwrap();
        let mut nbrs: Vec<(f64, usize)> = self
            .tree
            .nearest_n::<SquaredEuclidean>(&q, k)
            .into_iter()
            .map(|n| {
                let i = n.item as usize;
                ((v - self.points[i]).norm(), i)
            })
            .collect();
        nbrs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Some(idw_point(&nbrs, self.points, params))
    }
}

/// Σ d_i^{−p} q_i / Σ d_i^{−p} over `(d_i, index)` pairs sorted by distance;
/// the nearest point itself when it is closer than ε.
pub fn idw_point(nbrs: &[(f64, usize)], points: &[Point3<f64>], params: &IdwParams) -> Point3<f64> {
    let (d0, i0) = nbrs[0];
    if d0 < params.epsilon {
        return points[i0];
    }
    let mut acc = nalgebra::Vector3::zeros();
    let mut total = 0.0;
    for &(d, i) in nbrs {
        let w = d.powf(-params.power);
        acc += points[i].coords * w;
        total += w;
    }
    Point3::from(acc / total)
}

/// Moves every vertex with a cloud point within the search radius to the
/// inverse-distance-weighted average of its K nearest points.
pub fn idw_refine(mesh: &TriMesh, cloud: &PointCloud, params: &IdwParams) -> TriMesh {
    idw_refine_masked(mesh, cloud, params, None).0
}

/// [`idw_refine`] restricted to vertices with `mask[v]` set. Returns the
/// mesh and the number of vertices moved.
pub fn idw_refine_masked(
    mesh: &TriMesh,
    cloud: &PointCloud,
    params: &IdwParams,
    mask: Option<&[bool]>,
) -> (TriMesh, usize) {
    if cloud.is_empty() {
        return (mesh.clone(), 0);
    }
    let index = CloudIndex::new(&cloud.points);
    let moved: Vec<Option<Point3<f64>>> = mesh
        .vertices
        .par_iter()
        .enumerate()
        .map(|(k, v)| {
            if mask.is_some_and(|m| !m[k]) {
                return None;
            }
            index.interpolate(v, params)
        })
        .collect();
    let mut out = mesh.clone();
    let mut count = 0;
    for (k, p) in moved.into_iter().enumerate() {
        if let Some(p) = p {
            out.vertices[k] = p;
            count += 1;
        }
    }
    (out.with_normals(), count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize) -> IdwParams {
        IdwParams {
            neighbors: k,
            power: 2.0,
            epsilon: 1e-7,
            radius: 10.0,
        }
    }

    fn one_vertex(v: Point3<f64>) -> TriMesh {
        TriMesh::new(vec![v], vec![])
    }

    fn cloud(points: Vec<Point3<f64>>) -> PointCloud {
        PointCloud { points, normals: None }
    }

    #[test]
    fn equidistant_pair_averages() {
        let c = cloud(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]);
        let out = idw_refine(&one_vertex(Point3::origin()), &c, &params(2));
        assert!((out.vertices[0] - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coincident_point_wins() {
        let q = Point3::new(0.2, 0.3, 0.4);
        let c = cloud(vec![q, Point3::new(1.0, 1.0, 1.0), Point3::new(-1.0, 0.0, 0.0)]);
        let out = idw_refine(&one_vertex(q), &c, &params(3));
        assert_eq!(out.vertices[0], q);
    }

    #[test]
    fn repeated_neighbor_is_reproduced() {
        let q = Point3::new(0.5, -0.25, 0.125);
        let c = cloud(vec![q; 8]);
        let out = idw_refine(&one_vertex(Point3::origin()), &c, &params(8));
        assert!((out.vertices[0] - q).norm() < 1e-15);
    }

    #[test]
    fn out_of_radius_vertex_stays() {
        let c = cloud(vec![Point3::new(1.0, 0.0, 0.0)]);
        let p = IdwParams {
            radius: 0.5,
            ..params(1)
        };
        let out = idw_refine(&one_vertex(Point3::origin()), &c, &p);
        assert_eq!(out.vertices[0], Point3::origin());
    }

    #[test]
    fn empty_cloud_is_identity() {
        let m = one_vertex(Point3::new(0.1, 0.2, 0.3));
        assert_eq!(idw_refine(&m, &cloud(vec![]), &params(8)).vertices, m.vertices);
    }
}
