use super::camera::OrthoCamera;
use super::maps::{DepthMap, NormalMap, PointCloud};

/// One point per valid pixel on a `stride` lattice, at (x(i), y(j), z).
/// Normals are copied from `normals` when given.
pub fn depth_to_points(depth: &DepthMap, cam: &OrthoCamera, stride: usize, normals: Option<&NormalMap>) -> PointCloud {
    let stride = stride.max(1);
    let mut cloud = PointCloud {
        points: Vec::new(),
        normals: normals.map(|_| Vec::new()),
    };
    for j in (0..depth.height).step_by(stride) {
        for i in (0..depth.width).step_by(stride) {
            let Some(z) = depth.get(i, j) else { continue };
            cloud.points.push(cam.unproject(i as f64, j as f64, z));
            if let (Some(out), Some(nm)) = (cloud.normals.as_mut(), normals) {
                let (r, u, f) = cam.basis();
                let n = nm.get(i, j).unwrap_or(nalgebra::Vector3::z());
                out.push(r * n.x + u * n.y + f * n.z);
            }
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_pixel() {
        let cam = OrthoCamera::front(512, 512);
        let mut d = DepthMap::empty(512, 512);
        d.set(256, 256, 0.3);
        let c = depth_to_points(&d, &cam, 1, None);
        assert_eq!(c.len(), 1);
        let p = c.points[0];
        assert!((p.x - 0.001953125).abs() < 1e-12);
        assert!((p.y + 0.001953125).abs() < 1e-12);
        assert_eq!(p.z, 0.3);
    }

    #[test]
    fn counts_by_stride() {
        let cam = OrthoCamera::front(33, 20);
        let d = DepthMap::from_fn(33, 20, |_, _| Some(0.0));
        assert_eq!(depth_to_points(&d, &cam, 1, None).len(), 33 * 20);
        assert_eq!(depth_to_points(&d, &cam, 2, None).len(), 17 * 10);
        assert!(depth_to_points(&DepthMap::empty(4, 4), &cam, 1, None).is_empty());
    }
}
