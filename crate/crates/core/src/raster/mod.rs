//! Orthographic rasters: depth rendering, normals, optical flow, warping and
//! back-projection.

pub mod camera;
pub mod flow;
pub mod maps;
pub mod normals;
pub mod points;
pub mod render;

pub use camera::{OrthoCamera, View};
pub use flow::{estimate_flow, estimate_flow_with, warp_depth, FlowEstimate, FlowParams};
pub use maps::{DepthMap, FlowField, NormalMap, PointCloud};
pub use normals::{normal_from_depth, render_normal_preview};
pub use points::depth_to_points;
pub use render::{render_depth, render_depth_ids, NO_TRIANGLE};
