use crate::geom::laplacian::{solve_cg, Csr};
use crate::raster::DepthMap;
use crate::strokes::Displacement;

/// Target frontal depth implied by a stroke set on a coarse depth map.
///
/// Under the stroke support the coarse depth is replaced by a harmonic fill
/// from the surrounding depth (the surface with any existing stroke-scale
/// relief removed) plus Δ. Everywhere else the target is the coarse depth.
/// Providers work from the residual `target − coarse`, so strokes that are
/// already present in the coarse mesh are not applied twice.
#[derive(Debug, Clone)]
pub struct StrokeTarget {
    pub displacement: Displacement,
    pub base: DepthMap,
    pub target: DepthMap,
    /// target − coarse on the valid support, zero elsewhere.
    pub residual: Vec<f64>,
}

impl StrokeTarget {
    pub fn new(coarse: &DepthMap, displacement: Displacement) -> Self {
        let base = harmonic_fill(coarse, &displacement.support);
        let mut target = coarse.clone();
        let mut residual = vec![0.0; coarse.depth.len()];
        for (k, r) in residual.iter_mut().enumerate() {
            if coarse.valid[k] && displacement.support[k] {
                target.depth[k] = base.depth[k] + displacement.values[k];
                *r = target.depth[k] - coarse.depth[k];
            }
        }
        Self {
            displacement,
            base,
            target,
            residual,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.residual.iter().all(|r| *r == 0.0)
    }

    /// Residual at continuous raster coordinates (pixel centers at integers),
    /// bilinear, zero outside the raster.
    pub fn residual_at(&self, u: f64, v: f64) -> f64 {
        let (w, h) = (self.base.width as i64, self.base.height as i64);
        let (x0, y0) = (u.floor(), v.floor());
        let (fx, fy) = (u - x0, v - y0);
        let mut acc = 0.0;
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                let (i, j) = (x0 as i64 + di, y0 as i64 + dj);
                if i >= 0 && j >= 0 && i < w && j < h {
                    acc += wx * wy * self.residual[(j * w + i) as usize];
                }
            }
        }
        acc
    }
}

/// Replaces the valid pixels of `region` by the solution of Laplace's
/// equation with the surrounding valid depth as boundary values. Invalid
/// neighbors are ignored (natural boundary). Regions that touch no valid
/// pixel outside themselves keep their depth.
pub fn harmonic_fill(depth: &DepthMap, region: &[bool]) -> DepthMap {
    let (w, h) = (depth.width, depth.height);
    let mut out = depth.clone();
    let inside = |k: usize| region[k] && depth.valid[k];
    let nbrs = |k: usize| {
        let (i, j) = (k % w, k / w);
        let mut n = Vec::with_capacity(4);
        if i > 0 {
            n.push(k - 1);
        }
        if i + 1 < w {
            n.push(k + 1);
        }
        if j > 0 {
            n.push(k - w);
        }
        if j + 1 < h {
            n.push(k + w);
        }
        n.retain(|&q| depth.valid[q]);
        n
    };

    // Keep only components anchored by a known neighbor.
    let mut comp = vec![usize::MAX; w * h];
    let mut anchored = Vec::new();
    for start in 0..w * h {
        if !inside(start) || comp[start] != usize::MAX {
            continue;
        }
        let id = anchored.len();
        let mut has_anchor = false;
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(k) = stack.pop() {
            for q in nbrs(k) {
                if inside(q) {
                    if comp[q] == usize::MAX {
                        comp[q] = id;
                        stack.push(q);
                    }
                } else {
                    has_anchor = true;
                }
            }
        }
        anchored.push(has_anchor);
    }
    let mut slot = vec![usize::MAX; w * h];
    let mut unknowns = Vec::new();
    for k in 0..w * h {
        if inside(k) && anchored[comp[k]] {
            slot[k] = unknowns.len();
            unknowns.push(k);
        }
    }
    if unknowns.is_empty() {
        return out;
    }
    let mut row_start = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = vec![0.0; unknowns.len()];
    for (row, &k) in unknowns.iter().enumerate() {
        let n = nbrs(k);
        let mut diag_col = None;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
        for &q in &n {
            if slot[q] != usize::MAX {
                entries.push((slot[q], -1.0));
            } else {
                rhs[row] += depth.depth[q];
            }
        }
        entries.push((row, n.len() as f64));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            if c == row {
                diag_col = Some(cols.len());
            }
            cols.push(c);
            vals.push(v);
        }
        debug_assert!(diag_col.is_some());
        row_start.push(cols.len());
    }
    let a = Csr {
        n: unknowns.len(),
        row_start,
        cols,
        vals,
    };
    let mut x: Vec<f64> = unknowns.iter().map(|&k| depth.depth[k]).collect();
    solve_cg(&a, &rhs, &mut x, 1e-12, 20 * unknowns.len() + 100);
    for (s, &k) in unknowns.iter().enumerate() {
        out.depth[k] = x[s];
    }
    out
}
