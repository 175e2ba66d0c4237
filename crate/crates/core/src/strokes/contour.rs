use super::{SketchImage, CONTOUR_COLOR};
use crate::geom::TriMesh;
use crate::raster::{render_depth, DepthMap, OrthoCamera};

/// Depth difference between neighboring valid pixels that counts as an
/// occluding contour.
pub const DEPTH_JUMP: f64 = 0.05;

/// Silhouette and depth-discontinuity pixels of the mesh's frontal render,
/// white on black. Pixels are marked on the near side only, so a silhouette
/// is a single closed ring one pixel wide.
pub fn render_contours(mesh: &TriMesh, cam: &OrthoCamera) -> SketchImage {
    if mesh.is_empty() {
        return SketchImage::blank(cam.width, cam.height);
    }
    contours_of_depth(&render_depth(mesh, cam))
}

pub fn contours_of_depth(depth: &DepthMap) -> SketchImage {
    let (w, h) = (depth.width, depth.height);
    let mut img = SketchImage::blank(w, h);
    for j in 0..h {
        for i in 0..w {
            let Some(z) = depth.get(i, j) else { continue };
            let mut edge = false;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a < 0 || b < 0 || a >= w as i64 || b >= h as i64 {
                    edge = true;
                    break;
                }
                match depth.get(a as usize, b as usize) {
                    None => edge = true,
                    Some(zn) if z - zn > DEPTH_JUMP => edge = true,
                    _ => {}
                }
            }
            if edge {
                img.set(i, j, CONTOUR_COLOR);
            }
        }
    }
    img
}

/// Zhang–Suen thinning of the non-black pixels of a mask.
pub fn thin(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut m = mask.to_vec();
    let at =
        |m: &[bool], i: i64, j: i64| i >= 0 && j >= 0 && i < w as i64 && j < h as i64 && m[j as usize * w + i as usize];
    loop {
        let mut changed = false;
        for step in 0..2 {
            let mut remove = Vec::new();
            for j in 0..h as i64 {
                for i in 0..w as i64 {
                    if !at(&m, i, j) {
                        continue;
                    }
                    // P2..P9 clockwise from north.
                    let p = [
                        at(&m, i, j - 1),
                        at(&m, i + 1, j - 1),
                        at(&m, i + 1, j),
                        at(&m, i + 1, j + 1),
                        at(&m, i, j + 1),
                        at(&m, i - 1, j + 1),
                        at(&m, i - 1, j),
                        at(&m, i - 1, j - 1),
                    ];
                    let b = p.iter().filter(|x| **x).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
                    let ok = if step == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        remove.push(j as usize * w + i as usize);
                    }
                }
            }
            changed |= !remove.is_empty();
            for k in remove {
                m[k] = false;
            }
        }
        if !changed {
            return m;
        }
    }
}

/// Removes staircase corners: pixels with at least two neighbors that stay
/// 8-connected to each other without them.
fn prune_corners(mut m: Vec<bool>, w: usize, h: usize) -> Vec<bool> {
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            if !m[j as usize * w + i as usize] {
                continue;
            }
            let mut n = Vec::new();
            for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    let (a, b) = (i + di, j + dj);
                    if (di, dj) != (0, 0)
                        && a >= 0
                        && b >= 0
                        && a < w as i64
                        && b < h as i64
                        && m[b as usize * w + a as usize]
                    {
                        n.push((a, b));
                    }
                }
            }
            if n.len() >= 2 && single_group(&n) {
                m[j as usize * w + i as usize] = false;
            }
        }
    }
    m
}

fn single_group(n: &[(i64, i64)]) -> bool {
    let mut reached = vec![false; n.len()];
    reached[0] = true;
    let mut stack = vec![0];
    while let Some(a) = stack.pop() {
        for b in 0..n.len() {
            if !reached[b] && (n[a].0 - n[b].0).abs() <= 1 && (n[a].1 - n[b].1).abs() <= 1 {
                reached[b] = true;
                stack.push(b);
            }
        }
    }
    reached.iter().all(|r| *r)
}

/// One 8-connected component of a thinned contour image.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourLoop {
    pub pixels: Vec<(usize, usize)>,
    /// Every pixel has at least two 8-neighbors in the component.
    pub closed: bool,
    /// Length of the traced chain (axial steps 1, diagonal steps √2),
    /// including the closing step.
    pub chain_length: f64,
}

/// Thins the white pixels and splits them into 8-connected components.
pub fn contour_loops(img: &SketchImage) -> Vec<ContourLoop> {
    let (w, h) = (img.width, img.height);
    let mask: Vec<bool> = img.pixels.iter().map(|p| *p == CONTOUR_COLOR).collect();
    let m = prune_corners(thin(&mask, w, h), w, h);
    let mut seen = vec![false; w * h];
    let mut loops = Vec::new();
    let nbrs = |k: usize| {
        let (i, j) = ((k % w) as i64, (k / w) as i64);
        let mut out = Vec::with_capacity(8);
        for (di, dj) in [
            (1i64, 0i64),
            (0, 1),
            (-1, 0),
            (0, -1),
            (1, 1),
            (-1, 1),
            (-1, -1),
            (1, -1),
        ] {
            let (a, b) = (i + di, j + dj);
            if a >= 0 && b >= 0 && a < w as i64 && b < h as i64 {
                let kk = b as usize * w + a as usize;
                if m[kk] {
                    out.push(kk);
                }
            }
        }
        out
    };
    for start in 0..w * h {
        if !m[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(k) = stack.pop() {
            for n in nbrs(k) {
                if !seen[n] {
                    seen[n] = true;
                    comp.push(n);
                    stack.push(n);
                }
            }
        }
        comp.sort_unstable();
        let closed = comp.iter().all(|&k| nbrs(k).len() >= 2);
        let chain_length = trace_length(&comp, &m, w, h);
        loops.push(ContourLoop {
            pixels: comp.iter().map(|&k| (k % w, k / w)).collect(),
            closed,
            chain_length,
        });
    }
    loops
}

/// Walks the chain from its first pixel, preferring axial over diagonal
/// steps, and sums step lengths back to the start.
fn trace_length(comp: &[usize], m: &[bool], w: usize, h: usize) -> f64 {
    let mut visited = std::collections::HashSet::new();
    let start = comp[0];
    let mut cur = start;
    visited.insert(cur);
    let mut length = 0.0;
    loop {
        let (i, j) = ((cur % w) as i64, (cur / w) as i64);
        let mut next = None;
        let mut back_to_start = None;
        for (di, dj) in [
            (1i64, 0i64),
            (0, 1),
            (-1, 0),
            (0, -1),
            (1, 1),
            (-1, 1),
            (-1, -1),
            (1, -1),
        ] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= w as i64 || b >= h as i64 {
                continue;
            }
            let k = b as usize * w + a as usize;
            if !m[k] {
                continue;
            }
            let step = if di != 0 && dj != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            };
            if !visited.contains(&k) {
                next = Some((k, step));
                break;
            }
            if k == start && visited.len() > 2 && back_to_start.is_none() {
                back_to_start = Some(step);
            }
        }
        match next {
            Some((k, step)) => {
                length += step;
                visited.insert(k);
                cur = k;
            }
            None => {
                length += back_to_start.unwrap_or(0.0);
                return length;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::mesh::icosphere;
    use nalgebra::Vector3;

    #[test]
    fn sphere_gives_one_closed_loop() {
        let cam = OrthoCamera::front(256, 256);
        let img = render_contours(&icosphere(0.5, 5), &cam);
        let loops = contour_loops(&img);
        assert_eq!(loops.len(), 1);
        assert!(loops[0].closed);
        let r_px = 0.5 * 128.0;
        let circ = 2.0 * std::f64::consts::PI * r_px;
        assert!(
            (loops[0].chain_length - circ).abs() <= 0.1 * circ,
            "{} vs {circ}",
            loops[0].chain_length
        );
    }

    #[test]
    fn two_spheres_two_loops() {
        let a = icosphere(0.3, 4).transformed(|p| p + Vector3::new(-0.5, 0.0, 0.0));
        let b = icosphere(0.3, 4).transformed(|p| p + Vector3::new(0.5, 0.0, 0.0));
        let img = render_contours(&TriMesh::concat([&a, &b]), &OrthoCamera::front(128, 128));
        let loops = contour_loops(&img);
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| l.closed));
    }

    #[test]
    fn empty_mesh_is_black() {
        let img = render_contours(&TriMesh::default(), &OrthoCamera::front(16, 16));
        assert_eq!(img.count_nonblack(), 0);
    }
}
