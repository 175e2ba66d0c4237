use crate::strokes::for_each_pixel_near;

/// Side of the square descriptor raster.
pub const DESCRIPTOR_SIZE: usize = 32;

/// Border left free around the normalized drawing, in raster pixels.
const MARGIN: f64 = 2.0;

/// Gaussian line profile σ, in raster pixels.
const SIGMA: f64 = 1.0;

/// Maps polylines so their joint bounding box is centered in the descriptor
/// raster with its longer side spanning `DESCRIPTOR_SIZE − 2·MARGIN` pixels.
/// Aspect ratio is kept. A single point lands at the center.
pub fn normalize_polylines<'a>(polylines: impl IntoIterator<Item = &'a [[f64; 2]]>) -> Vec<Vec<[f64; 2]>> {
    let polylines: Vec<&[[f64; 2]]> = polylines.into_iter().collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in polylines.iter().copied().flatten() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let n = DESCRIPTOR_SIZE as f64;
    let scale = if extent > 0.0 { (n - 2.0 * MARGIN) / extent } else { 0.0 };
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    polylines
        .iter()
        .map(|pl| {
            pl.iter()
                .map(|p| {
                    [
                        0.5 * n + (p[0] - center[0]) * scale,
                        0.5 * n + (p[1] - center[1]) * scale,
                    ]
                })
                .collect()
        })
        .collect()
}

/// 32×32 rasterization of the normalized polylines with a Gaussian line
/// profile (max over lines), flattened row-major and scaled to unit L2 norm.
pub fn descriptor<'a>(polylines: impl IntoIterator<Item = &'a [[f64; 2]]>) -> Vec<f64> {
    let n = DESCRIPTOR_SIZE;
    let mut raster = vec![0.0f64; n * n];
    for pl in normalize_polylines(polylines) {
        for_each_pixel_near(&pl, 3.0 * SIGMA, n, n, |i, j, d| {
            let v = (-0.5 * (d / SIGMA).powi(2)).exp();
            let cell = &mut raster[j * n + i];
            *cell = cell.max(v);
        });
    }
    let norm = raster.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        raster.iter_mut().for_each(|v| *v /= norm);
    }
    raster
}
