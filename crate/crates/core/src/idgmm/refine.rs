use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{FlowMode, RefineConfig};
use super::idw::idw_refine_masked;
use super::providers::{ProviderBundle, ProviderContext};
use super::target::StrokeTarget;
use super::update::{implicit_iterations, UpdateStats};
use crate::error::{Error, Result};
use crate::geom::{subdivide_region, TriMesh};
use crate::raster::{
    depth_to_points, render_depth, render_depth_ids, warp_depth, DepthMap, FlowField, NormalMap, OrthoCamera,
    PointCloud, NO_TRIANGLE,
};
use crate::strokes::{
    draw_strokes, for_each_pixel_near, render_contours, stroke_displacement_field, SketchImage, Stroke,
};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct RefineDiagnostics {
    pub stages: Vec<StageTiming>,
    pub subdivided_triangles: usize,
    pub vertices_in: usize,
    pub vertices_out: usize,
    pub implicit: UpdateStats,
    pub idw_moved: usize,
    pub flow_disjoint: bool,
    /// Mean flow magnitude in pixels over the last depth iteration.
    pub flow_mean_px: f64,
    /// Set when a provider failed and the input mesh was returned.
    pub error: Option<String>,
}

impl RefineDiagnostics {
    pub fn total_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.ms).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutput {
    pub mesh: TriMesh,
    pub diagnostics: RefineDiagnostics,
}

/// Intermediate rasters of one pass (last depth iteration).
#[derive(Debug, Clone)]
pub struct RefineArtifacts {
    pub sketch: SketchImage,
    pub coarse_depth: DepthMap,
    pub normals: NormalMap,
    pub updated_depth: DepthMap,
    pub enhanced_depth: DepthMap,
    pub aligned_depth: DepthMap,
    pub cloud: PointCloud,
}

impl RefineArtifacts {
    /// Writes `S_f.png`, `D_c.png`, `N.png`, `D_c_prime.png`, `D_f.png`,
    /// `D_f_prime.png` and `P.obj`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.sketch.save_png(dir.join("S_f.png"))?;
        self.coarse_depth.save_png(dir.join("D_c.png"))?;
        self.normals.save_png(dir.join("N.png"))?;
        self.updated_depth.save_png(dir.join("D_c_prime.png"))?;
        self.enhanced_depth.save_png(dir.join("D_f.png"))?;
        self.aligned_depth.save_png(dir.join("D_f_prime.png"))?;
        std::fs::write(dir.join("P.obj"), self.cloud.to_obj_string())?;
        Ok(())
    }
}

struct Timer {
    start: Instant,
    stages: Vec<StageTiming>,
}

impl Timer {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            stage,
            ms: (now - self.start).as_secs_f64() * 1e3,
        });
        self.start = now;
    }
}

/// One fine-stage pass turning the coarse mesh and the user strokes into the
/// refined mesh.
pub fn refine(
    mc: &TriMesh,
    strokes: &[Stroke],
    providers: &ProviderBundle,
    cfg: &RefineConfig,
) -> Result<RefineOutput> {
    Ok(refine_with_artifacts(mc, strokes, providers, cfg)?.0)
}

/// [`refine`] that also writes the intermediate rasters to `debug_dir`.
pub fn refine_debug(
    mc: &TriMesh,
    strokes: &[Stroke],
    providers: &ProviderBundle,
    cfg: &RefineConfig,
    debug_dir: Option<&Path>,
) -> Result<RefineOutput> {
    let (out, artifacts) = refine_with_artifacts(mc, strokes, providers, cfg)?;
    if let (Some(dir), Some(a)) = (debug_dir, artifacts) {
        a.save(dir)?;
    }
    Ok(out)
}

pub fn refine_with_artifacts(
    mc: &TriMesh,
    strokes: &[Stroke],
    providers: &ProviderBundle,
    cfg: &RefineConfig,
) -> Result<(RefineOutput, Option<RefineArtifacts>)> {
    cfg.validate()?;
    mc.validate()?;
    if !mc.is_watertight() {
        return Err(Error::OpenMesh {
            boundary_edges: mc.boundary_edge_count(),
        });
    }
    for s in strokes {
        s.validate()?;
    }
    let mut diag = RefineDiagnostics {
        vertices_in: mc.vertices.len(),
        ..Default::default()
    };
    match run(mc, strokes, providers, cfg, &mut diag) {
        Ok((mesh, artifacts)) => {
            diag.vertices_out = mesh.vertices.len();
            Ok((
                RefineOutput {
                    mesh,
                    diagnostics: diag,
                },
                artifacts,
            ))
        }
        Err(e @ Error::Provider { .. }) => {
            log::warn!("refine aborted: {e}");
            diag.error = Some(e.to_string());
            diag.vertices_out = mc.vertices.len();
            Ok((
                RefineOutput {
                    mesh: mc.clone(),
                    diagnostics: diag,
                },
                None,
            ))
        }
        Err(e) => Err(e),
    }
}

fn provider_err(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Provider { .. } => e,
        other => Error::Provider {
            provider: name,
            reason: other.to_string(),
        },
    }
}

fn run(
    mc: &TriMesh,
    strokes: &[Stroke],
    providers: &ProviderBundle,
    cfg: &RefineConfig,
    diag: &mut RefineDiagnostics,
) -> Result<(TriMesh, Option<RefineArtifacts>)> {
    let cam = OrthoCamera::front(cfg.raster, cfg.raster);
    let mut timer = Timer::new();

    let mut sketch = render_contours(mc, &cam);
    draw_strokes(&mut sketch, strokes);
    let coarse_depth = render_depth(mc, &cam);
    let target = StrokeTarget::new(
        &coarse_depth,
        stroke_displacement_field(strokes, cam.width, cam.height, cfg.amplitude),
    );
    timer.lap("encode");

    let mask = stroke_footprint(strokes, cam.width, cam.height);
    let mut mesh = mc.clone();
    for _ in 0..cfg.subdivision_levels {
        let region = covered_triangles(&mesh, &cam, &mask);
        if region.is_empty() {
            break;
        }
        diag.subdivided_triangles += region.len();
        mesh = subdivide_region(&mesh, &region)?.mesh;
    }
    timer.lap("subdivide");

    let ctx = ProviderContext {
        camera: &cam,
        config: cfg,
        target: &target,
    };
    let ns = &providers.normal_synth;
    let normals = ns
        .synthesize(&sketch, &coarse_depth, &ctx)
        .map_err(provider_err(ns.name()))?;
    timer.lap("normal_synth");
    let sp = &providers.sdf_provider;
    let field = sp.field(&normals, &sketch, mc, &ctx).map_err(provider_err(sp.name()))?;
    timer.lap("sdf_provider");
    let (mut mesh, stats) = implicit_iterations(&mesh, field.as_ref(), cfg.step_clamp_voxels, cfg.implicit_iterations);
    diag.implicit = stats;
    timer.lap("implicit_update");

    let zone = target.displacement.dilated_support(cfg.idw_radius_px.ceil() as usize);
    let mut artifacts = None;
    for _ in 0..cfg.depth_iterations {
        let updated_depth = render_depth(&mesh, &cam);
        let de = &providers.depth_enhance;
        let enhanced = de
            .enhance(&updated_depth, &normals, &ctx)
            .map_err(provider_err(de.name()))?;
        if (enhanced.width, enhanced.height) != (cam.width, cam.height) {
            return Err(Error::Provider {
                provider: de.name(),
                reason: format!("returned a {}x{} depth map", enhanced.width, enhanced.height),
            });
        }
        timer.lap("depth_enhance");

        let fp = &providers.flow_provider;
        let flow = match cfg.flow {
            FlowMode::Gather => {
                let est = fp
                    .flow(&enhanced, &updated_depth, &ctx)
                    .map_err(provider_err(fp.name()))?;
                diag.flow_disjoint = est.disjoint;
                est.flow
            }
            FlowMode::NegatedInverse => {
                let est = fp
                    .flow(&updated_depth, &enhanced, &ctx)
                    .map_err(provider_err(fp.name()))?;
                diag.flow_disjoint = est.disjoint;
                let mut f = est.flow;
                f.flow.iter_mut().for_each(|v| *v = [-v[0], -v[1]]);
                f
            }
            FlowMode::Disabled => FlowField::zeros(cam.width, cam.height),
        };
        diag.flow_mean_px = mean_magnitude(&flow);
        let aligned = warp_depth(&enhanced, &flow).map_err(provider_err(fp.name()))?;
        timer.lap("flow");

        let cloud = depth_to_points(&aligned, &cam, cfg.point_stride, None);
        let active = depth_guided_vertices(&mesh, &cam, &zone);
        let (next, moved) = idw_refine_masked(&mesh, &cloud, &cfg.idw_params(), Some(&active));
        diag.idw_moved = moved;
        mesh = next;
        timer.lap("idw_refine");
        artifacts = Some(RefineArtifacts {
            sketch: sketch.clone(),
            coarse_depth: coarse_depth.clone(),
            normals: normals.clone(),
            updated_depth,
            enhanced_depth: enhanced,
            aligned_depth: aligned,
            cloud,
        });
    }
    diag.stages = timer.stages;

    if !mesh.is_watertight() {
        return Err(Error::InvalidMesh(format!(
            "refined mesh has {} boundary edges",
            mesh.boundary_edge_count()
        )));
    }
    Ok((mesh, artifacts))
}

fn mean_magnitude(flow: &FlowField) -> f64 {
    if flow.flow.is_empty() {
        return 0.0;
    }
    flow.flow.iter().map(|v| v[0].hypot(v[1])).sum::<f64>() / flow.flow.len() as f64
}

/// Front-facing vertices projecting into `zone`.
fn depth_guided_vertices(mesh: &TriMesh, cam: &OrthoCamera, zone: &[bool]) -> Vec<bool> {
    let toward = cam.toward_viewer();
    mesh.vertex_normals()
        .iter()
        .zip(&mesh.vertices)
        .map(|(n, v)| n.dot(&toward) > 0.0 && cam.pixel_of(v).is_some_and(|(i, j)| zone[j * cam.width + i]))
        .collect()
}

/// Stroke pixels grown by each stroke's width.
pub fn stroke_footprint(strokes: &[Stroke], width: usize, height: usize) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    for s in strokes {
        let radius = (0.5 * s.width).max(std::f64::consts::FRAC_1_SQRT_2) + s.width;
        for_each_pixel_near(&s.points, radius, width, height, |i, j, _| mask[j * width + i] = true);
    }
    mask
}

/// Front-facing triangles that own a footprint pixel or have a vertex
/// projecting into one.
pub fn covered_triangles(mesh: &TriMesh, cam: &OrthoCamera, mask: &[bool]) -> Vec<usize> {
    let (_, ids) = render_depth_ids(mesh, cam);
    let mut hit = vec![false; mesh.triangles.len()];
    for (k, &t) in ids.iter().enumerate() {
        if mask[k] && t != NO_TRIANGLE {
            hit[t as usize] = true;
        }
    }
    let toward = cam.toward_viewer();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if hit[t] || mesh.face_normal_raw(t).dot(&toward) <= 0.0 {
            continue;
        }
        hit[t] = tri.iter().any(|&v| {
            cam.pixel_of(&mesh.vertices[v])
                .is_some_and(|(i, j)| mask[j * cam.width + i])
        });
    }
    (0..hit.len()).filter(|&t| hit[t]).collect()
}
