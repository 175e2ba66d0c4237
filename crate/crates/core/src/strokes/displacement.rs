use super::{for_each_pixel_near, Stroke, StrokeKind};

/// Default displacement amplitude A in model units.
pub const DEFAULT_AMPLITUDE: f64 = 0.06;

/// Gaussian cross-sections are truncated at this many σ.
pub const SUPPORT_SIGMAS: f64 = 3.0;

/// Signed per-pixel depth offset implied by a stroke set, with the union of
/// the stroke supports.
#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub support: Vec<bool>,
}

impl Displacement {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            support: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Support grown by `radius` pixels (Chebyshev).
    pub fn dilated_support(&self, radius: usize) -> Vec<bool> {
        let (w, h) = (self.width, self.height);
        let mut rows = vec![false; w * h];
        for j in 0..h {
            for i in 0..w {
                if self.support[j * w + i] {
                    for ii in i.saturating_sub(radius)..(i + radius + 1).min(w) {
                        rows[j * w + ii] = true;
                    }
                }
            }
        }
        let mut out = vec![false; w * h];
        for j in 0..h {
            for i in 0..w {
                if rows[j * w + i] {
                    for jj in j.saturating_sub(radius)..(j + radius + 1).min(h) {
                        out[jj * w + i] = true;
                    }
                }
            }
        }
        out
    }

    /// Adds another field in place (fields of stroke unions add).
    pub fn accumulate(&mut self, other: &Displacement) {
        for k in 0..self.values.len() {
            self.values[k] += other.values[k];
            self.support[k] |= other.support[k];
        }
    }
}

/// Δ = Σ s·A·(1 − c/255)·exp(−d²/2σ²) over ridge (s = +1) and valley
/// (s = −1) strokes, σ = stroke width, d = distance from the pixel center to
/// the polyline, truncated beyond 3σ. Contour strokes contribute nothing.
pub fn stroke_displacement_field(strokes: &[Stroke], width: usize, height: usize, amplitude: f64) -> Displacement {
    let mut out = Displacement::zeros(width, height);
    for s in strokes {
        let sign = match s.kind {
            StrokeKind::Ridge => 1.0,
            StrokeKind::Valley => -1.0,
            StrokeKind::Contour => continue,
        };
        let weight = sign * amplitude * (1.0 - s.intensity() as f64 / 255.0);
        let sigma = s.width;
        let inv = 1.0 / (2.0 * sigma * sigma);
        for_each_pixel_near(&s.points, SUPPORT_SIGMAS * sigma, width, height, |i, j, d| {
            let k = j * width + i;
            out.values[k] += weight * (-d * d * inv).exp();
            out.support[k] = true;
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_strokes_is_zero() {
        let d = stroke_displacement_field(&[], 32, 32, DEFAULT_AMPLITUDE);
        assert!(d.is_zero());
        assert!(d.support.iter().all(|s| !s));
    }

    #[test]
    fn peak_matches_formula() {
        // Polyline through pixel centers so d = 0 is attained.
        let s = Stroke::ridge(vec![[10.5, 20.5], [50.5, 20.5]], 1.0);
        let d = stroke_displacement_field(&[s], 64, 64, 0.06);
        let expect = 0.06 * (1.0 - 1.0 / 255.0);
        assert!((d.max_abs() - expect).abs() < 1e-15);
        assert!((d.get(30, 20) - expect).abs() < 1e-15);
    }

    #[test]
    fn mirrored_ridge_valley_antisymmetric() {
        let w = 96;
        let r = Stroke::ridge(vec![[10.0, 20.0], [30.0, 44.0], [35.0, 70.0]], 0.7);
        let v = Stroke {
            kind: StrokeKind::Valley,
            ..r.mirrored(w)
        };
        let d = stroke_displacement_field(&[r, v], w, 80, 0.06);
        for j in 0..80 {
            for i in 0..w {
                assert!((d.get(i, j) + d.get(w - 1 - i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn linear_in_strokes() {
        let a = Stroke::ridge(vec![[10.0, 10.0], [50.0, 40.0]], 0.6);
        let b = Stroke::valley(vec![[20.0, 50.0], [40.0, 5.0]], 0.9).with_width(5.0);
        let mut sum = stroke_displacement_field(std::slice::from_ref(&a), 64, 64, 0.06);
        sum.accumulate(&stroke_displacement_field(std::slice::from_ref(&b), 64, 64, 0.06));
        let both = stroke_displacement_field(&[a, b], 64, 64, 0.06);
        for k in 0..both.values.len() {
            assert!((both.values[k] - sum.values[k]).abs() < 1e-15);
        }
        assert_eq!(both.support, sum.support);
    }

    #[test]
    fn support_is_three_sigma() {
        let s = Stroke::ridge(vec![[32.5, 10.5], [32.5, 50.5]], 0.5).with_width(2.0);
        let d = stroke_displacement_field(&[s], 64, 64, 0.06);
        assert!(d.support[30 * 64 + 26]);
        assert!(!d.support[30 * 64 + 25]);
        assert_eq!(d.get(25, 30), 0.0);
    }
}
