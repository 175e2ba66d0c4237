//! Fine-stage refinement: field-guided vertex update followed by
//! flow-aligned depth-guided refinement.

pub mod config;
pub mod idw;
pub mod providers;
pub mod refine;
pub mod target;
pub mod update;

pub use config::{FlowMode, IdwParams, RefineConfig};
pub use idw::{idw_point, idw_refine, idw_refine_masked, CloudIndex};
pub use providers::{
    DepthEnhance, FlowProvider, HornSchunckFlow, NormalSynth, ProceduralDepthEnhance, ProceduralNormalSynth,
    ProceduralSdf, ProviderBundle, ProviderContext, SdfProvider, StrokeField,
};
pub use refine::{
    covered_triangles, refine, refine_debug, refine_with_artifacts, stroke_footprint, RefineArtifacts,
    RefineDiagnostics, RefineOutput, StageTiming,
};
pub use target::{harmonic_fill, StrokeTarget};
pub use update::{
    field_normals, implicit_iterations, implicit_update, implicit_update_along, mean_abs_field, UpdateStats,
    MAX_HALVINGS,
};

use crate::raster::{normal_from_depth, DepthMap, NormalMap, OrthoCamera};
use crate::strokes::{stroke_displacement_field, Stroke};

/// Instant frontal preview: normals of the coarse depth displaced by the
/// strokes.
pub fn stroke_preview(coarse_depth: &DepthMap, strokes: &[Stroke], cam: &OrthoCamera, amplitude: f64) -> NormalMap {
    let disp = stroke_displacement_field(strokes, coarse_depth.width, coarse_depth.height, amplitude);
    let mut d = coarse_depth.clone();
    for k in 0..d.depth.len() {
        if d.valid[k] {
            d.depth[k] += disp.values[k];
        }
    }
    normal_from_depth(&d, cam)
}
