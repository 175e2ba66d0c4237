use std::collections::BTreeMap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geom::{k_ring, laplacian_deform, TriMesh};
use crate::raster::{render_depth_ids, OrthoCamera, View, NO_TRIANGLE};

/// Fewest silhouette vertices a profile edit accepts.
pub const MIN_SILHOUETTE_VERTICES: usize = 4;

fn require_side(cam: &OrthoCamera) -> Result<()> {
    if cam.view != View::Side {
        return Err(Error::InvalidInput("profile editing needs a side camera".into()));
    }
    Ok(())
}

/// Mesh vertices on the frontal half (z ≥ 0) of the side-view silhouette,
/// ordered top to bottom.
///
/// For every raster row the frontmost covered pixel is found; the vertex of
/// the triangle hit there with the largest z represents the row.
pub fn side_silhouette(mesh: &TriMesh, cam: &OrthoCamera) -> Result<Vec<usize>> {
    Ok(silhouette_triangles(mesh, cam)?.0)
}

/// Silhouette vertices plus every vertex of the triangles that own a
/// frontal silhouette pixel.
fn silhouette_triangles(mesh: &TriMesh, cam: &OrthoCamera) -> Result<(Vec<usize>, Vec<usize>)> {
    require_side(cam)?;
    let (depth, ids) = render_depth_ids(mesh, cam);
    let mut picked = Vec::new();
    let mut support = Vec::new();
    let mut seen = vec![false; mesh.vertices.len()];
    let mut in_support = vec![false; mesh.vertices.len()];
    for j in 0..cam.height {
        // Screen right is −z, so the leftmost covered pixel is the frontmost.
        let Some(i) = (0..cam.width).find(|&i| depth.get(i, j).is_some()) else {
            continue;
        };
        let t = ids[depth.idx(i, j)];
        if t == NO_TRIANGLE {
            continue;
        }
        let p = cam.unproject(i as f64, j as f64, depth.get(i, j).unwrap());
        if p.z < 0.0 {
            continue;
        }
        let tri = mesh.triangles[t as usize];
        for &v in &tri {
            if !in_support[v] {
                in_support[v] = true;
                support.push(v);
            }
        }
        let v = *tri
            .iter()
            .max_by(|&&a, &&b| mesh.vertices[a].z.total_cmp(&mesh.vertices[b].z).then(b.cmp(&a)))
            .unwrap();
        if !seen[v] {
            seen[v] = true;
            picked.push(v);
        }
    }
    picked.sort_by(|&a, &b| mesh.vertices[b].y.total_cmp(&mesh.vertices[a].y).then(a.cmp(&b)));
    support.sort_unstable();
    Ok((picked, support))
}

/// Side-canvas polyline through the silhouette vertices: the initial
/// profile shown to the user.
pub fn side_profile(mesh: &TriMesh, cam: &OrthoCamera) -> Result<Vec<[f64; 2]>> {
    Ok(side_silhouette(mesh, cam)?
        .into_iter()
        .map(|v| {
            let (cx, cy, _) = cam.to_canvas(&mesh.vertices[v]);
            [cx, cy]
        })
        .collect())
}

fn normalized_arc_length(pts: &[[f64; 2]]) -> Vec<f64> {
    let mut s = vec![0.0; pts.len()];
    for k in 1..pts.len() {
        s[k] = s[k - 1] + ((pts[k][0] - pts[k - 1][0]).powi(2) + (pts[k][1] - pts[k - 1][1]).powi(2)).sqrt();
    }
    let total = *s.last().unwrap_or(&0.0);
    if total > 0.0 {
        s.iter_mut().for_each(|x| *x /= total);
    }
    s
}

/// Point of the target at normalized arc length `s`.
fn at_arc_length(pts: &[[f64; 2]], arc: &[f64], s: f64) -> [f64; 2] {
    let k = arc.partition_point(|&x| x < s).clamp(1, pts.len() - 1);
    let span = arc[k] - arc[k - 1];
    let t = if span > 0.0 {
        ((s - arc[k - 1]) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [
        pts[k - 1][0] + t * (pts[k][0] - pts[k - 1][0]),
        pts[k - 1][1] + t * (pts[k][1] - pts[k - 1][1]),
    ]
}

/// Target canvas x for a handle at canvas row `cy`: the crossing of the
/// target with that row nearest (in arc length) to `s`, or the arc-length
/// point when the row misses the target.
fn target_x(pts: &[[f64; 2]], arc: &[f64], s: f64, cy: f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for k in 1..pts.len() {
        let (a, b) = (pts[k - 1], pts[k]);
        if cy < a[1].min(b[1]) || cy > a[1].max(b[1]) {
            continue;
        }
        let t = if b[1] != a[1] { (cy - a[1]) / (b[1] - a[1]) } else { 0.0 };
        let (x, sk) = (a[0] + t * (b[0] - a[0]), arc[k - 1] + t * (arc[k] - arc[k - 1]));
        if best.is_none_or(|(_, d)| (sk - s).abs() < d) {
            best = Some((x, (sk - s).abs()));
        }
    }
    best.map_or_else(|| at_arc_length(pts, arc, s)[0], |(x, _)| x)
}

/// Deforms the mesh so its frontal side-view silhouette follows `target`, a
/// side-canvas polyline ordered top to bottom.
///
/// Silhouette vertices are matched to the target by normalized arc length
/// and keep x and y while taking their depth from the target. The other
/// vertices of triangles on the silhouette move by the same depth offset,
/// interpolated by height, so the surface between silhouette vertices
/// follows too. All of these are Laplacian handles; vertices within `rings`
/// of a handle are free.
pub fn profile_depth_edit(mesh: &TriMesh, target: &[[f64; 2]], cam: &OrthoCamera, rings: usize) -> Result<TriMesh> {
    let handles = profile_handles(mesh, target, cam)?;
    let roi = k_ring(mesh, &handles.keys().copied().collect::<Vec<_>>(), rings);
    laplacian_deform(mesh, &handles, &roi)
}

/// Handle targets used by [`profile_depth_edit`].
pub fn profile_handles(mesh: &TriMesh, target: &[[f64; 2]], cam: &OrthoCamera) -> Result<BTreeMap<usize, Point3<f64>>> {
    require_side(cam)?;
    if target.len() < 2 || target.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidInput(
            "target profile needs at least 2 finite points".into(),
        ));
    }
    if target[0][1] > target[target.len() - 1][1] {
        return Err(Error::InvalidInput("target profile must run top to bottom".into()));
    }
    let (sil, support) = silhouette_triangles(mesh, cam)?;
    if sil.len() < MIN_SILHOUETTE_VERTICES {
        return Err(Error::DegenerateSilhouette(sil.len()));
    }
    let canvas: Vec<[f64; 2]> = sil
        .iter()
        .map(|&v| {
            let (cx, cy, _) = cam.to_canvas(&mesh.vertices[v]);
            [cx, cy]
        })
        .collect();
    let s_sil = normalized_arc_length(&canvas);
    let s_tgt = normalized_arc_length(target);
    let offsets: Vec<f64> = sil
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let cx = target_x(target, &s_tgt, s_sil[k], canvas[k][1]);
            cam.from_canvas(cx, canvas[k][1], 0.0).z - mesh.vertices[v].z
        })
        .collect();
    let mut handles = BTreeMap::new();
    for &v in &support {
        let p = mesh.vertices[v];
        let cy = cam.to_canvas(&p).1;
        // Silhouette rows run top to bottom, so canvas y is ascending.
        let k = canvas.partition_point(|c| c[1] < cy);
        let dz = if k == 0 || k == canvas.len() {
            continue;
        } else {
            let (a, b) = (canvas[k - 1][1], canvas[k][1]);
            let t = if b > a { (cy - a) / (b - a) } else { 0.0 };
            offsets[k - 1] + t * (offsets[k] - offsets[k - 1])
        };
        handles.insert(v, Point3::new(p.x, p.y, p.z + dz));
    }
    for (k, &v) in sil.iter().enumerate() {
        let p = mesh.vertices[v];
        handles.insert(v, Point3::new(p.x, p.y, p.z + offsets[k]));
    }
    Ok(handles)
}
