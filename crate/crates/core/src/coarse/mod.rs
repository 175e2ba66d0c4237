//! Coarse stage: contour inflation per canvas layer, 3D part layout, merge
//! into a single closed mesh, and side-profile editing.

mod parts;
mod profile;
mod sketch;

pub use parts::{apply_layout, generate_parts, inflation_field, merge_parts, mirror_x, CoarseParams};
pub use profile::{profile_depth_edit, profile_handles, side_profile, side_silhouette, MIN_SILHOUETTE_VERTICES};
pub use sketch::{
    circle_contour, is_part_name, validate_contour, PartCopy, PartLayout, PartSketch, PartTransform, FACE, LEFT_EAR,
    MAX_ATTACHMENTS, RIGHT_EAR,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::TriMesh;

/// A sketch file: the canvas layers, optionally with a part layout. A bare
/// [`PartSketch`] is a valid document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchDocument {
    #[serde(flatten)]
    pub sketch: PartSketch,
    #[serde(default)]
    pub layout: PartLayout,
}

impl SketchDocument {
    pub fn from_json(json: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(json)?;
        doc.sketch.validate()?;
        doc.layout.validate()?;
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self, params: &CoarseParams) -> Result<TriMesh> {
        build_coarse(&self.sketch, &self.layout, params)
    }
}

/// Sketch → parts → layout → merged coarse mesh.
pub fn build_coarse(sketch: &PartSketch, layout: &PartLayout, params: &CoarseParams) -> Result<TriMesh> {
    let parts = apply_layout(&generate_parts(sketch, params)?, layout)?;
    merge_parts(&parts, params)
}
