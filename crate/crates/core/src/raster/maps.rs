use std::io::Cursor;
use std::path::Path;

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Camera-space depth raster with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Option<f64>) -> Self {
        let mut d = Self::empty(width, height);
        for j in 0..height {
            for i in 0..width {
                if let Some(z) = f(i, j) {
                    d.set(i, j, z);
                }
            }
        }
        d
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.idx(i, j);
        self.valid[k].then(|| self.depth[k])
    }

    pub fn set(&mut self, i: usize, j: usize, z: f64) {
        let k = self.idx(i, j);
        self.depth[k] = z;
        self.valid[k] = true;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn same_size(&self, other: &DepthMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Mean |a − b| over pixels valid in both.
    pub fn mean_abs_diff(&self, other: &DepthMap) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for k in 0..self.depth.len() {
            if self.valid[k] && other.valid[k] {
                sum += (self.depth[k] - other.depth[k]).abs();
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// 16-bit PNG: round((z + 1)/2 · 65535), with 0 reserved for invalid.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_fn(self.width as u32, self.height as u32, |i, j| {
                Luma([match self.get(i as usize, j as usize) {
                    Some(z) => encode_depth(z),
                    None => 0,
                }])
            });
        png_bytes(img)
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.into_luma16();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Ok(Self::from_fn(w, h, |i, j| {
            let v = img.get_pixel(i as u32, j as u32)[0];
            (v != 0).then(|| v as f64 / 65535.0 * 2.0 - 1.0)
        }))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }
}

fn encode_depth(z: f64) -> u16 {
    ((z.clamp(-1.0, 1.0) + 1.0) * 0.5 * 65535.0).round().max(1.0) as u16
}

fn png_bytes<P, C>(img: ImageBuffer<P, C>) -> Result<Vec<u8>>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Camera-space unit normals with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            normals: vec![Vector3::zeros(); width * height],
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<Vector3<f64>> {
        let k = j * self.width + i;
        self.valid[k].then(|| self.normals[k])
    }

    /// 8-bit RGB PNG: round((n + 1)/2 · 255) per channel, black if invalid.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        png_bytes(self.to_rgb())
    }

    pub fn to_rgb(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |i, j| {
            match self.get(i as usize, j as usize) {
                Some(n) => Rgb([enc8(n.x), enc8(n.y), enc8(n.z)]),
                None => Rgb([0, 0, 0]),
            }
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }
}

fn enc8(c: f64) -> u8 {
    ((c.clamp(-1.0, 1.0) + 1.0) * 0.5 * 255.0).round() as u8
}

/// Per-pixel displacement in pixels, (du, dv) with v pointing down.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub flow: Vec<[f64; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            flow: vec![[0.0; 2]; width * height],
        }
    }

    pub fn uniform(width: usize, height: usize, du: f64, dv: f64) -> Self {
        Self {
            width,
            height,
            flow: vec![[du, dv]; width * height],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        self.flow[j * self.width + i]
    }
}

/// Back-projected depth samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// OBJ point records (`v x y z`).
    pub fn to_obj_string(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 48);
        for p in &self.points {
            s.push_str(&format!("v {:?} {:?} {:?}\n", p.x, p.y, p.z));
        }
        s
    }
}

pub(crate) fn check_size(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!(
            "raster size mismatch: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}
