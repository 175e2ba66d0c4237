use nalgebra::Vector3;

use super::camera::OrthoCamera;
use super::maps::{DepthMap, NormalMap};

/// Normals n ∝ (−∂z/∂x, −∂z/∂y, 1) from central differences in model units,
/// falling back to one-sided differences where a neighbor is invalid.
pub fn normal_from_depth(depth: &DepthMap, cam: &OrthoCamera) -> NormalMap {
    let (w, h) = (depth.width, depth.height);
    let dx = 2.0 / cam.width as f64;
    let dy = 2.0 / cam.height as f64;
    let mut out = NormalMap::empty(w, h);
    for j in 0..h {
        for i in 0..w {
            let Some(z) = depth.get(i, j) else { continue };
            let left = if i > 0 { depth.get(i - 1, j) } else { None };
            let right = if i + 1 < w { depth.get(i + 1, j) } else { None };
            // Row index grows downward, screen y upward.
            let up = if j > 0 { depth.get(i, j - 1) } else { None };
            let down = if j + 1 < h { depth.get(i, j + 1) } else { None };
            let zx = derivative(left, z, right, dx);
            let zy = derivative(down, z, up, dy);
            let k = j * w + i;
            out.normals[k] = Vector3::new(-zx, -zy, 1.0).normalize();
            out.valid[k] = true;
        }
    }
    out
}

fn derivative(minus: Option<f64>, z: f64, plus: Option<f64>, step: f64) -> f64 {
    match (minus, plus) {
        (Some(a), Some(b)) => (b - a) / (2.0 * step),
        (None, Some(b)) => (b - z) / step,
        (Some(a), None) => (z - a) / step,
        (None, None) => 0.0,
    }
}

/// Frontal normal-map preview of a (stroke-displaced) depth map.
pub fn render_normal_preview(depth: &DepthMap, cam: &OrthoCamera) -> NormalMap {
    normal_from_depth(depth, cam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::icosphere;
    use crate::raster::render::render_depth;

    #[test]
    fn constant_depth_faces_viewer() {
        let cam = OrthoCamera::front(32, 32);
        let d = DepthMap::from_fn(32, 32, |_, _| Some(0.1));
        let n = normal_from_depth(&d, &cam);
        assert!(n.normals.iter().all(|v| *v == Vector3::z()));
    }

    #[test]
    fn ramp_normals() {
        let cam = OrthoCamera::front(64, 64);
        let d = DepthMap::from_fn(64, 64, |i, j| Some(0.5 * cam.pixel_center(i, j).0));
        let n = normal_from_depth(&d, &cam);
        let expect = Vector3::new(-0.5, 0.0, 1.0).normalize();
        for j in 1..63 {
            for i in 1..63 {
                assert!((n.get(i, j).unwrap() - expect).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sphere_normals_within_three_degrees() {
        let cam = OrthoCamera::front(512, 512);
        let d = render_depth(&icosphere(0.5, 6), &cam);
        let n = normal_from_depth(&d, &cam);
        let mut worst: f64 = 0.0;
        for j in 0..512 {
            for i in 0..512 {
                let Some(z) = d.get(i, j) else { continue };
                let (x, y) = cam.pixel_center(i, j);
                let truth = Vector3::new(x, y, z).normalize();
                if truth.z < 0.5 {
                    continue;
                }
                let got = n.get(i, j).unwrap();
                worst = worst.max(got.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        assert!(worst <= 3.0, "worst {worst}°");
    }
}
