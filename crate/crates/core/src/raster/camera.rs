use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Viewing direction of an orthographic camera over the [-1, 1]³ model box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// Looking down −z: screen x = x, screen y = y, depth = z.
    Front,
    /// Looking down −x from +x: screen x = −z, screen y = y, depth = x.
    Side,
}

/// Orthographic camera with a W×H raster. Pixel (i, j) has its center at
/// screen x = −1 + 2(i + 0.5)/W, y = 1 − 2(j + 0.5)/H. Larger depth is
/// closer to the viewer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthoCamera {
    pub width: usize,
    pub height: usize,
    pub view: View,
}

impl Default for OrthoCamera {
    fn default() -> Self {
        Self::front(512, 512)
    }
}

impl OrthoCamera {
    pub fn front(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            view: View::Front,
        }
    }

    pub fn side(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            view: View::Side,
        }
    }

    /// Screen-right, screen-up and toward-viewer unit axes.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        match self.view {
            View::Front => (Vector3::x(), Vector3::y(), Vector3::z()),
            View::Side => (-Vector3::z(), Vector3::y(), Vector3::x()),
        }
    }

    /// Direction toward the viewer.
    pub fn toward_viewer(&self) -> Vector3<f64> {
        self.basis().2
    }

    /// Model units covered by one pixel horizontally.
    pub fn pixel_size(&self) -> f64 {
        2.0 / self.width as f64
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        self.raster_to_screen(i as f64, j as f64)
    }

    /// Continuous raster coordinates (pixel centers at integers) to screen.
    pub fn raster_to_screen(&self, u: f64, v: f64) -> (f64, f64) {
        (
            -1.0 + 2.0 * (u + 0.5) / self.width as f64,
            1.0 - 2.0 * (v + 0.5) / self.height as f64,
        )
    }

    pub fn screen_to_raster(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x + 1.0) * 0.5 * self.width as f64 - 0.5,
            (1.0 - y) * 0.5 * self.height as f64 - 0.5,
        )
    }

    /// Canvas pixel coordinates (pixel (i, j) spans [i, i+1) × [j, j+1),
    /// y down) to screen coordinates.
    pub fn canvas_to_screen(&self, cx: f64, cy: f64) -> (f64, f64) {
        (-1.0 + 2.0 * cx / self.width as f64, 1.0 - 2.0 * cy / self.height as f64)
    }

    pub fn screen_to_canvas(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x + 1.0) * 0.5 * self.width as f64,
            (1.0 - y) * 0.5 * self.height as f64,
        )
    }

    /// Canvas coordinates and depth of a model point.
    pub fn to_canvas(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let (u, v, d) = self.project(p);
        (u + 0.5, v + 0.5, d)
    }

    /// Model point on the canvas position at the given depth.
    pub fn from_canvas(&self, cx: f64, cy: f64, depth: f64) -> Point3<f64> {
        self.unproject(cx - 0.5, cy - 0.5, depth)
    }

    /// Model point → (u, v, depth) with (u, v) continuous raster coordinates.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let (r, up, f) = self.basis();
        let (u, v) = self.screen_to_raster(p.coords.dot(&r), p.coords.dot(&up));
        (u, v, p.coords.dot(&f))
    }

    /// Inverse of [`project`](Self::project).
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        let (r, up, f) = self.basis();
        let (x, y) = self.raster_to_screen(u, v);
        Point3::from(r * x + up * y + f * depth)
    }

    /// Pixel containing a point, if inside the raster.
    pub fn pixel_of(&self, p: &Point3<f64>) -> Option<(usize, usize)> {
        let (u, v, _) = self.project(p);
        let (i, j) = ((u + 0.5).floor(), (v + 0.5).floor());
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.width && (j as usize) < self.height)
            .then_some((i as usize, j as usize))
    }
}
