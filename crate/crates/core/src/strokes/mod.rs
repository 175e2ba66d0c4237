//! Curvature-aware strokes: the stroke model, its RGB sketch encoding,
//! silhouette contours, and the image-space displacement the strokes imply.

mod contour;
mod displacement;

use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use contour::{contour_loops, render_contours, thin, ContourLoop, DEPTH_JUMP};
pub use displacement::{stroke_displacement_field, Displacement, DEFAULT_AMPLITUDE, SUPPORT_SIGMAS};

pub const DEFAULT_WIDTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeKind {
    Ridge,
    Valley,
    Contour,
}

/// A polyline on the W×H canvas (pixel units, y down) with depth attribute
/// `a` ∈ [0, 1] (1 = strongest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub kind: StrokeKind,
    pub points: Vec<[f64; 2]>,
    pub a: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

fn default_width() -> f64 {
    DEFAULT_WIDTH
}

impl Stroke {
    pub fn new(kind: StrokeKind, points: Vec<[f64; 2]>, a: f64) -> Self {
        Self {
            kind,
            points,
            a,
            width: DEFAULT_WIDTH,
        }
    }

    pub fn ridge(points: Vec<[f64; 2]>, a: f64) -> Self {
        Self::new(StrokeKind::Ridge, points, a)
    }

    pub fn valley(points: Vec<[f64; 2]>, a: f64) -> Self {
        Self::new(StrokeKind::Valley, points, a)
    }

    pub fn with_width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidInput("stroke needs at least 2 points".into()));
        }
        if !(0.0..=1.0).contains(&self.a) {
            return Err(Error::InvalidInput(format!(
                "depth attribute {} outside [0, 1]",
                self.a
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "stroke width {} must be positive",
                self.width
            )));
        }
        if self.points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("stroke point is not finite".into()));
        }
        Ok(())
    }

    /// Color intensity c = round(255 − 254·a): a=0 → 255, a=1 → 1.
    pub fn intensity(&self) -> u8 {
        intensity(self.a)
    }

    /// Mirror about the canvas vertical midline.
    pub fn mirrored(&self, canvas_width: usize) -> Stroke {
        let w = canvas_width as f64;
        Stroke {
            points: self.points.iter().map(|[x, y]| [w - x, *y]).collect(),
            ..self.clone()
        }
    }
}

pub fn intensity(a: f64) -> u8 {
    (255.0 - 254.0 * a.clamp(0.0, 1.0)).round() as u8
}

/// Symmetric mode: each stroke followed by its mirror image.
pub fn with_mirrors(strokes: &[Stroke], canvas_width: usize) -> Vec<Stroke> {
    strokes
        .iter()
        .flat_map(|s| [s.clone(), s.mirrored(canvas_width)])
        .collect()
}

/// RGB sketch raster: ridge (c,0,0), valley (0,c,0), contour white on black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

pub const CONTOUR_COLOR: [u8; 3] = [255, 255, 255];

impl SketchImage {
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0; 3]; width * height],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [u8; 3] {
        self.pixels[j * self.width + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: [u8; 3]) {
        self.pixels[j * self.width + i] = c;
    }

    /// Stroke class and depth attribute of a pixel, if it is a stroke pixel.
    pub fn decode(&self, i: usize, j: usize) -> Option<(StrokeKind, f64)> {
        decode_pixel(self.get(i, j))
    }

    pub fn count_nonblack(&self) -> usize {
        self.pixels.iter().filter(|p| **p != [0, 0, 0]).count()
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let img: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(self.width as u32, self.height as u32, |i, j| {
            Rgb(self.get(i as usize, j as usize))
        });
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_rgb8();
        Ok(Self {
            width: img.width() as usize,
            height: img.height() as usize,
            pixels: img.pixels().map(|p| p.0).collect(),
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }
}

pub fn decode_pixel(p: [u8; 3]) -> Option<(StrokeKind, f64)> {
    match p {
        CONTOUR_COLOR => Some((StrokeKind::Contour, 0.0)),
        [c, 0, 0] if c > 0 => Some((StrokeKind::Ridge, (255.0 - c as f64) / 254.0)),
        [0, c, 0] if c > 0 => Some((StrokeKind::Valley, (255.0 - c as f64) / 254.0)),
        _ => None,
    }
}

/// Distance from `p` to segment a-b.
#[inline]
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

/// Visits every pixel whose center lies within `radius` of the polyline,
/// with that distance. Each pixel is visited once.
pub fn for_each_pixel_near(
    points: &[[f64; 2]],
    radius: f64,
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize, f64),
) {
    if points.is_empty() || width == 0 || height == 0 {
        return;
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let clampi = |v: f64, n: usize| v.clamp(0.0, n as f64 - 1.0) as usize;
    let (i0, i1) = (
        clampi((x0 - radius - 0.5).floor(), width),
        clampi((x1 + radius).ceil(), width),
    );
    let (j0, j1) = (
        clampi((y0 - radius - 0.5).floor(), height),
        clampi((y1 + radius).ceil(), height),
    );
    let bw = i1 - i0 + 1;
    let mut best = vec![f64::INFINITY; bw * (j1 - j0 + 1)];
    let segs: Vec<([f64; 2], [f64; 2])> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in segs {
        let si0 = clampi((a[0].min(b[0]) - radius - 0.5).floor(), width);
        let si1 = clampi((a[0].max(b[0]) + radius).ceil(), width);
        let sj0 = clampi((a[1].min(b[1]) - radius - 0.5).floor(), height);
        let sj1 = clampi((a[1].max(b[1]) + radius).ceil(), height);
        for j in sj0..=sj1 {
            for i in si0..=si1 {
                let d = segment_distance([i as f64 + 0.5, j as f64 + 0.5], a, b);
                let k = (j - j0) * bw + (i - i0);
                if d < best[k] {
                    best[k] = d;
                }
            }
        }
    }
    for j in j0..=j1 {
        for i in i0..=i1 {
            let d = best[(j - j0) * bw + (i - i0)];
            if d <= radius {
                f(i, j, d);
            }
        }
    }
}

/// Rasterizes strokes onto a blank canvas.
pub fn encode_strokes(strokes: &[Stroke], width: usize, height: usize) -> SketchImage {
    let mut img = SketchImage::blank(width, height);
    draw_strokes(&mut img, strokes);
    img
}

/// Rasterizes strokes over an existing sketch (e.g. the contour image);
/// later strokes overwrite earlier pixels.
pub fn draw_strokes(img: &mut SketchImage, strokes: &[Stroke]) {
    for s in strokes {
        let c = s.intensity();
        let color = match s.kind {
            StrokeKind::Ridge => [c, 0, 0],
            StrokeKind::Valley => [0, c, 0],
            StrokeKind::Contour => CONTOUR_COLOR,
        };
        // Half the width, but never thinner than an 8-connected line.
        let radius = (0.5 * s.width).max(std::f64::consts::FRAC_1_SQRT_2);
        let (w, h) = (img.width, img.height);
        for_each_pixel_near(&s.points, radius, w, h, |i, j, _| img.set(i, j, color));
    }
}
