use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the flow provider's output aligns D_f with D′_c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    /// flow = provider(D_f, D′_c); D′_f(p) = D_f(p + flow(p)).
    #[default]
    Gather,
    /// flow = −provider(D′_c, D_f), the first-order inverse of the reverse
    /// estimate.
    NegatedInverse,
    /// D′_f = D_f.
    Disabled,
}

/// Fine-stage refinement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Side of the square frontal raster.
    pub raster: usize,
    /// Lattice resolution of the fine field.
    pub field_resolution: usize,
    pub idw_neighbors: usize,
    pub idw_power: f64,
    pub idw_epsilon: f64,
    /// IDW search radius in pixels.
    pub idw_radius_px: f64,
    /// Implicit step clamp in voxels of grid-backed fields.
    pub step_clamp_voxels: f64,
    pub implicit_iterations: usize,
    pub depth_iterations: usize,
    /// Stroke displacement amplitude A in model units.
    pub amplitude: f64,
    /// Width τ of the procedural field's surface band, in voxels.
    pub sdf_band_voxels: f64,
    pub flow: FlowMode,
    /// Refinement passes over stroke-covered triangles.
    pub subdivision_levels: usize,
    /// Pixel stride of the depth-to-points sampling.
    pub point_stride: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            raster: 512,
            field_resolution: 128,
            idw_neighbors: 8,
            idw_power: 2.0,
            idw_epsilon: 1e-7,
            idw_radius_px: 4.0,
            step_clamp_voxels: 2.0,
            implicit_iterations: 1,
            depth_iterations: 1,
            amplitude: crate::strokes::DEFAULT_AMPLITUDE,
            sdf_band_voxels: 3.0,
            flow: FlowMode::Gather,
            subdivision_levels: 2,
            point_stride: 1,
        }
    }
}

impl RefineConfig {
    // Negated comparisons so NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("refine config: {m}")));
        if self.raster < 8 {
            return bad("raster must be at least 8");
        }
        if self.field_resolution < 8 {
            return bad("field resolution must be at least 8");
        }
        if self.idw_neighbors == 0 {
            return bad("K must be at least 1");
        }
        if !(self.step_clamp_voxels > 0.0) {
            return bad("step clamp must be positive");
        }
        if !(self.amplitude > 0.0) {
            return bad("amplitude must be positive");
        }
        if !(self.idw_radius_px > 0.0) || !(self.idw_epsilon >= 0.0) || !self.idw_power.is_finite() {
            return bad("invalid IDW parameters");
        }
        if !(self.sdf_band_voxels > 0.0) {
            return bad("band width must be positive");
        }
        if self.point_stride == 0 {
            return bad("point stride must be at least 1");
        }
        Ok(())
    }

    /// Model-space size of one raster pixel.
    pub fn pixel_size(&self) -> f64 {
        2.0 / self.raster as f64
    }

    /// Model-space spacing of the fine lattice over [-1, 1]³.
    pub fn voxel_size(&self) -> f64 {
        2.0 / self.field_resolution as f64
    }

    pub fn idw_params(&self) -> IdwParams {
        IdwParams {
            neighbors: self.idw_neighbors,
            power: self.idw_power,
            epsilon: self.idw_epsilon,
            radius: self.idw_radius_px * self.pixel_size(),
        }
    }
}

/// Inverse distance weighting parameters in model units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdwParams {
    pub neighbors: usize,
    pub power: f64,
    pub epsilon: f64,
    pub radius: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RefineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.idw_params().radius, 4.0 * 2.0 / 512.0);
    }

    #[test]
    fn zero_neighbors_rejected() {
        let c = RefineConfig {
            idw_neighbors: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RefineConfig = serde_json::from_str(r#"{"flow":"disabled","raster":256}"#).unwrap();
        assert_eq!(c.flow, FlowMode::Disabled);
        assert_eq!(c.raster, 256);
        assert_eq!(c.idw_neighbors, 8);
    }
}
