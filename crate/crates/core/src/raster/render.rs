use super::camera::OrthoCamera;
use super::maps::DepthMap;
use crate::geom::TriMesh;

/// Background marker in a triangle-id buffer.
pub const NO_TRIANGLE: u32 = u32::MAX;

/// Z-buffered rasterization of the front-facing triangles.
pub fn render_depth(mesh: &TriMesh, cam: &OrthoCamera) -> DepthMap {
    render_depth_ids(mesh, cam).0
}

/// Depth plus the id of the triangle that won each pixel.
///
/// Pixel centers are covered by the half-open rule: a center exactly on a
/// shared edge belongs to exactly one of the two triangles.
pub fn render_depth_ids(mesh: &TriMesh, cam: &OrthoCamera) -> (DepthMap, Vec<u32>) {
    let (w, h) = (cam.width, cam.height);
    let mut depth = DepthMap::empty(w, h);
    let mut ids = vec![NO_TRIANGLE; w * h];
    let toward = cam.toward_viewer();
    let projected: Vec<(f64, f64, f64)> = mesh.vertices.iter().map(|p| cam.project(p)).collect();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if mesh.face_normal_raw(t).dot(&toward) <= 0.0 {
            continue;
        }
        let mut p = [projected[tri[0]], projected[tri[1]], projected[tri[2]]];
        let mut area = edge(&p[0], &p[1], &p[2]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            p.swap(1, 2);
            area = -area;
        }
        let umin = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let umax = p
            .iter()
            .map(|q| q.0)
            .fold(f64::NEG_INFINITY, f64::max)
            .floor()
            .min(w as f64 - 1.0);
        let vmin = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let vmax = p
            .iter()
            .map(|q| q.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .floor()
            .min(h as f64 - 1.0);
        if umin > umax || vmin > vmax {
            continue;
        }
        let owns = [
            owns_edge(&p[1], &p[2]),
            owns_edge(&p[2], &p[0]),
            owns_edge(&p[0], &p[1]),
        ];
        for j in vmin as usize..=vmax as usize {
            for i in umin as usize..=umax as usize {
                let c = (i as f64, j as f64, 0.0);
                let e = [edge(&p[1], &p[2], &c), edge(&p[2], &p[0], &c), edge(&p[0], &p[1], &c)];
                if (0..3).any(|k| e[k] < 0.0 || (e[k] == 0.0 && !owns[k])) {
                    continue;
                }
                let (l1, l2) = (e[1] / area, e[2] / area);
                let z = p[0].2 + l1 * (p[1].2 - p[0].2) + l2 * (p[2].2 - p[0].2);
                let k = j * w + i;
                if !depth.valid[k] || z > depth.depth[k] {
                    depth.depth[k] = z;
                    depth.valid[k] = true;
                    ids[k] = t as u32;
                }
            }
        }
    }
    (depth, ids)
}

/// Twice the signed area of (a, b, c) in raster coordinates.
#[inline]
fn edge(a: &(f64, f64, f64), b: &(f64, f64, f64), c: &(f64, f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Tie-break for centers exactly on an edge. The two triangles sharing an
/// edge traverse it in opposite directions, so exactly one owns it.
#[inline]
fn owns_edge(a: &(f64, f64, f64), b: &(f64, f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}
