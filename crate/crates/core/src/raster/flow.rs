//! Coarse-to-fine Horn–Schunck optical flow on depth maps, and gather warping.

use super::maps::{check_size, DepthMap, FlowField};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub levels: usize,
    pub alpha: f64,
    pub iterations: usize,
    /// Re-linearizations per pyramid level; they split `iterations`.
    pub warps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 3,
            alpha: 10.0,
            iterations: 100,
            warps: 2,
        }
    }
}

const SOR_OMEGA: f64 = 1.9;

const INTENSITY_PER_PIXEL: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEstimate {
    pub flow: FlowField,
    /// Set when the two valid regions do not overlap; the flow is zero.
    pub disjoint: bool,
}

/// Flow with dst(p) ≈ src(p + flow(p)) on the overlap of both masks.
/// Zero wherever `dst` is invalid.
pub fn estimate_flow(src: &DepthMap, dst: &DepthMap) -> Result<FlowEstimate> {
    estimate_flow_with(src, dst, &FlowParams::default())
}

pub fn estimate_flow_with(src: &DepthMap, dst: &DepthMap, params: &FlowParams) -> Result<FlowEstimate> {
    check_size((src.width, src.height), (dst.width, dst.height))?;
    let (w, h) = (src.width, src.height);
    let overlap = src.valid.iter().zip(&dst.valid).any(|(a, b)| *a && *b);
    if !overlap {
        log::warn!("flow: source and target depth regions do not overlap");
        return Ok(FlowEstimate {
            flow: FlowField::zeros(w, h),
            disjoint: true,
        });
    }
    // Far from both valid regions the flow is zero and both images are
    // flat, so the solve runs on their padded bounding box.
    let (mut i0, mut j0, mut i1, mut j1) = (w, h, 0, 0);
    for k in 0..w * h {
        if src.valid[k] || dst.valid[k] {
            let (i, j) = (k % w, k / w);
            (i0, j0, i1, j1) = (i0.min(i), j0.min(j), i1.max(i), j1.max(j));
        }
    }
    let (i0, j0) = (i0.saturating_sub(CROP_MARGIN), j0.saturating_sub(CROP_MARGIN));
    let (i1, j1) = ((i1 + CROP_MARGIN).min(w - 1), (j1 + CROP_MARGIN).min(h - 1));
    let (cw, ch) = (i1 - i0 + 1, j1 - j0 + 1);
    let crop = |d: &DepthMap| {
        let mut c = DepthMap::empty(cw, ch);
        for j in 0..ch {
            for i in 0..cw {
                let k = (j + j0) * w + i + i0;
                c.depth[j * cw + i] = d.depth[k];
                c.valid[j * cw + i] = d.valid[k];
            }
        }
        c
    };
    let (u, v) = solve(&crop(src), &crop(dst), params);
    let mut flow = FlowField::zeros(w, h);
    for j in 0..ch {
        for i in 0..cw {
            let k = (j + j0) * w + i + i0;
            if dst.valid[k] {
                flow.flow[k] = [u[j * cw + i], v[j * cw + i]];
            }
        }
    }
    Ok(FlowEstimate { flow, disjoint: false })
}

/// Padding around the valid regions kept by the solver.
const CROP_MARGIN: usize = 32;

/// Coarse-to-fine solve over the whole raster; returns (u, v).
fn solve(src: &DepthMap, dst: &DepthMap, params: &FlowParams) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (src.width, src.height);
    // Background takes the lowest depth seen in either map so silhouettes
    // read as steps toward the back.
    let floor = src
        .depth
        .iter()
        .zip(&src.valid)
        .chain(dst.depth.iter().zip(&dst.valid))
        .filter(|(_, v)| **v)
        .map(|(z, _)| *z)
        .fold(f64::INFINITY, f64::min);
    let fill = |d: &DepthMap| -> Img {
        Img {
            w,
            h,
            px: d
                .depth
                .iter()
                .zip(&d.valid)
                .map(|(z, v)| if *v { *z } else { floor })
                .collect(),
        }
    };
    let mut src_pyr = vec![fill(src)];
    let mut dst_pyr = vec![fill(dst)];
    for _ in 1..params.levels.max(1) {
        let (a, b) = (src_pyr.last().unwrap(), dst_pyr.last().unwrap());
        if a.w < 8 || a.h < 8 {
            break;
        }
        src_pyr.push(a.downsample());
        dst_pyr.push(b.downsample());
    }
    // Depth measured in quarter pixels of the level's own raster, so the
    // data/smoothness balance does not depend on resolution.
    for img in src_pyr.iter_mut().chain(dst_pyr.iter_mut()) {
        let s = img.w as f64 * 0.5 * INTENSITY_PER_PIXEL;
        img.px.iter_mut().for_each(|z| *z *= s);
    }

    let coarsest = src_pyr.len() - 1;
    let mut u = vec![0.0; src_pyr[coarsest].px.len()];
    let mut v = u.clone();
    for level in (0..=coarsest).rev() {
        let (s, d) = (&src_pyr[level], &dst_pyr[level]);
        if level != coarsest {
            let prev = &src_pyr[level + 1];
            u = upsample(&u, prev.w, prev.h, s.w, s.h);
            v = upsample(&v, prev.w, prev.h, s.w, s.h);
        }
        // The level's iteration budget is shared between re-linearizations.
        let warps = params.warps.clamp(1, params.iterations.max(1));
        for k in 0..warps {
            let n = params.iterations / warps + usize::from(k < params.iterations % warps);
            horn_schunck(s, d, &mut u, &mut v, params, n);
        }
    }
    (u, v)
}

#[derive(Clone)]
struct Img {
    w: usize,
    h: usize,
    px: Vec<f64>,
}

impl Img {
    #[inline]
    fn at(&self, i: isize, j: isize) -> f64 {
        let i = i.clamp(0, self.w as isize - 1) as usize;
        let j = j.clamp(0, self.h as isize - 1) as usize;
        self.px[j * self.w + i]
    }

    /// Bilinear sample with edge clamping.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (i, j) = (x0 as isize, y0 as isize);
        let a = self.at(i, j) * (1.0 - fx) + self.at(i + 1, j) * fx;
        let b = self.at(i, j + 1) * (1.0 - fx) + self.at(i + 1, j + 1) * fx;
        a * (1.0 - fy) + b * fy
    }

    /// Half resolution; each output pixel is the bilinear sample at the
    /// center of its 2×2 source block.
    fn downsample(&self) -> Img {
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut px = vec![0.0; w * h];
        for j in 0..h {
            for i in 0..w {
                px[j * w + i] = self.sample(2.0 * i as f64 + 0.5, 2.0 * j as f64 + 0.5);
            }
        }
        Img { w, h, px }
    }
}

fn upsample(f: &[f64], w0: usize, h0: usize, w: usize, h: usize) -> Vec<f64> {
    let img = Img {
        w: w0,
        h: h0,
        px: f.to_vec(),
    };
    let sx = w0 as f64 / w as f64;
    let sy = h0 as f64 / h as f64;
    let mut out = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let x = (i as f64 + 0.5) * sx - 0.5;
            let y = (j as f64 + 0.5) * sy - 0.5;
            // Displacements scale with resolution.
            out[j * w + i] = img.sample(x, y) / sx;
        }
    }
    out
}

/// One linearization: warp `src` by the current flow, then Jacobi
/// Horn–Schunck iterations on the total flow.
fn horn_schunck(src: &Img, dst: &Img, u: &mut [f64], v: &mut [f64], p: &FlowParams, iterations: usize) {
    let (w, h) = (src.w, src.h);
    let u0 = u.to_vec();
    let v0 = v.to_vec();
    let warped = Img {
        w,
        h,
        px: (0..w * h)
            .map(|k| {
                let (i, j) = ((k % w) as f64, (k / w) as f64);
                src.sample(i + u0[k], j + v0[k])
            })
            .collect(),
    };
    let mut ix = vec![0.0; w * h];
    let mut iy = vec![0.0; w * h];
    let mut it = vec![0.0; w * h];
    for j in 0..h as isize {
        for i in 0..w as isize {
            let k = j as usize * w + i as usize;
            ix[k] = 0.5 * (warped.at(i + 1, j) - warped.at(i - 1, j));
            iy[k] = 0.5 * (warped.at(i, j + 1) - warped.at(i, j - 1));
            it[k] = warped.px[k] - dst.px[k];
        }
    }
    let a2 = p.alpha * p.alpha;
    let denom: Vec<f64> = (0..w * h).map(|k| 1.0 / (a2 + ix[k] * ix[k] + iy[k] * iy[k])).collect();
    // Red-black successive over-relaxation: a color sweep only reads the
    // other color, so updating in place is order-independent.
    for _ in 0..iterations {
        for color in 0..2 {
            for j in 0..h {
                for i in ((j + color) % 2..w).step_by(2) {
                    let k = j * w + i;
                    let (ub, vb) = neighbor_mean(u, v, w, h, i, j);
                    let t = (ix[k] * (ub - u0[k]) + iy[k] * (vb - v0[k]) + it[k]) * denom[k];
                    u[k] += SOR_OMEGA * (ub - ix[k] * t - u[k]);
                    v[k] += SOR_OMEGA * (vb - iy[k] * t - v[k]);
                }
            }
        }
    }
}

#[inline]
fn neighbor_mean(u: &[f64], v: &[f64], w: usize, h: usize, i: usize, j: usize) -> (f64, f64) {
    let mut su = 0.0;
    let mut sv = 0.0;
    let mut n = 0.0;
    let k = j * w + i;
    let mut add = |kk: usize| {
        su += u[kk];
        sv += v[kk];
        n += 1.0;
    };
    if i > 0 {
        add(k - 1);
    }
    if i + 1 < w {
        add(k + 1);
    }
    if j > 0 {
        add(k - w);
    }
    if j + 1 < h {
        add(k + w);
    }
    (su / n, sv / n)
}

/// output(p) = depth(p + flow(p)) by bilinear gather; invalid when any tap
/// with nonzero weight is invalid or outside the raster.
pub fn warp_depth(depth: &DepthMap, flow: &FlowField) -> Result<DepthMap> {
    check_size((depth.width, depth.height), (flow.width, flow.height))?;
    let (w, h) = (depth.width, depth.height);
    let mut out = DepthMap::empty(w, h);
    for j in 0..h {
        for i in 0..w {
            let [du, dv] = flow.get(i, j);
            if let Some(z) = sample_bilinear(depth, i as f64 + du, j as f64 + dv) {
                out.set(i, j, z);
            }
        }
    }
    Ok(out)
}

/// Bilinear depth lookup at continuous raster coordinates.
pub fn sample_bilinear(depth: &DepthMap, x: f64, y: f64) -> Option<f64> {
    if !x.is_finite() || !y.is_finite() {
        return None;
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let mut acc = 0.0;
    for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
            let wt = wx * wy;
            if wt == 0.0 {
                continue;
            }
            let (ii, jj) = (x0 as i64 + di, y0 as i64 + dj);
            if ii < 0 || jj < 0 || ii >= depth.width as i64 || jj >= depth.height as i64 {
                return None;
            }
            acc += wt * depth.get(ii as usize, jj as usize)?;
        }
    }
    Some(acc)
}
