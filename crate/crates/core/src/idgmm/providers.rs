//! Field-provider contracts and the deterministic procedural providers.

use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use super::config::RefineConfig;
use super::target::StrokeTarget;
use crate::error::Result;
use crate::geom::{ExactMeshField, ScalarField, TriMesh};
use crate::raster::{estimate_flow, normal_from_depth, DepthMap, FlowEstimate, NormalMap, OrthoCamera};
use crate::strokes::SketchImage;

/// State shared by all providers of one refinement pass.
pub struct ProviderContext<'a> {
    pub camera: &'a OrthoCamera,
    pub config: &'a RefineConfig,
    /// Stroke displacement Δ and the target depth it implies on D_c.
    pub target: &'a StrokeTarget,
}

/// S_f, D_c → N.
pub trait NormalSynth: Send + Sync {
    fn name(&self) -> &'static str {
        "normal_synth"
    }
    fn synthesize(&self, sketch: &SketchImage, coarse_depth: &DepthMap, ctx: &ProviderContext) -> Result<NormalMap>;
}

/// D′_c, N → D_f.
pub trait DepthEnhance: Send + Sync {
    fn name(&self) -> &'static str {
        "depth_enhance"
    }
    fn enhance(&self, updated_depth: &DepthMap, normals: &NormalMap, ctx: &ProviderContext) -> Result<DepthMap>;
}

/// N, S_f, M_c → g.
pub trait SdfProvider: Send + Sync {
    fn name(&self) -> &'static str {
        "sdf_provider"
    }
    fn field(
        &self,
        normals: &NormalMap,
        sketch: &SketchImage,
        coarse: &TriMesh,
        ctx: &ProviderContext,
    ) -> Result<Arc<dyn ScalarField>>;
}

/// D_f, D′_c → flow with D′_c(p) ≈ D_f(p + flow(p)).
pub trait FlowProvider: Send + Sync {
    fn name(&self) -> &'static str {
        "flow_provider"
    }
    fn flow(&self, src: &DepthMap, dst: &DepthMap, ctx: &ProviderContext) -> Result<FlowEstimate>;
}

#[derive(Clone)]
pub struct ProviderBundle {
    pub normal_synth: Arc<dyn NormalSynth>,
    pub depth_enhance: Arc<dyn DepthEnhance>,
    pub sdf_provider: Arc<dyn SdfProvider>,
    pub flow_provider: Arc<dyn FlowProvider>,
}

impl ProviderBundle {
    pub fn procedural() -> Self {
        Self {
            normal_synth: Arc::new(ProceduralNormalSynth),
            depth_enhance: Arc::new(ProceduralDepthEnhance),
            sdf_provider: Arc::new(ProceduralSdf),
            flow_provider: Arc::new(HornSchunckFlow),
        }
    }
}

impl Default for ProviderBundle {
    fn default() -> Self {
        Self::procedural()
    }
}

impl std::fmt::Debug for ProviderBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderBundle")
            .field("normal_synth", &self.normal_synth.name())
            .field("depth_enhance", &self.depth_enhance.name())
            .field("sdf_provider", &self.sdf_provider.name())
            .field("flow_provider", &self.flow_provider.name())
            .finish()
    }
}

/// Normals of the target depth.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProceduralNormalSynth;

impl NormalSynth for ProceduralNormalSynth {
    fn synthesize(&self, _sketch: &SketchImage, coarse_depth: &DepthMap, ctx: &ProviderContext) -> Result<NormalMap> {
        Ok(normal_from_depth(&apply_residual(coarse_depth, ctx.target), ctx.camera))
    }
}

/// D′_c with the target depth written over the stroke support.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProceduralDepthEnhance;

impl DepthEnhance for ProceduralDepthEnhance {
    fn enhance(&self, updated_depth: &DepthMap, _normals: &NormalMap, ctx: &ProviderContext) -> Result<DepthMap> {
        let t = ctx.target;
        let mut out = updated_depth.clone();
        for k in 0..out.depth.len() {
            if out.valid[k] && t.displacement.support[k] && t.target.valid[k] {
                out.depth[k] = t.target.depth[k];
            }
        }
        Ok(out)
    }
}

fn apply_residual(depth: &DepthMap, target: &StrokeTarget) -> DepthMap {
    let mut out = depth.clone();
    for k in 0..out.depth.len() {
        if out.valid[k] {
            out.depth[k] += target.residual[k];
        }
    }
    out
}

/// Coarse-mesh distance field shifted toward the viewer by the stroke
/// residual on the frontal surface band. The coarse distance is exact; the
/// fine lattice resolution sets the band width and the voxel size.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProceduralSdf;

impl SdfProvider for ProceduralSdf {
    fn field(
        &self,
        _normals: &NormalMap,
        _sketch: &SketchImage,
        coarse: &TriMesh,
        ctx: &ProviderContext,
    ) -> Result<Arc<dyn ScalarField>> {
        let base = ExactMeshField::new(coarse, ctx.config.field_resolution)?;
        if ctx.target.is_empty() {
            return Ok(Arc::new(base));
        }
        let tau = ctx.config.sdf_band_voxels * ctx.config.voxel_size();
        Ok(Arc::new(StrokeField::new(base, ctx.target.clone(), *ctx.camera, tau)))
    }
}

/// g(p) = g_c(p) + R(π(p))·exp(−(g_c/τ)²)·max(0, n̂_z), with n̂ = −∇g_c/|∇g_c|
/// the outward normal and R a frontal raster sampled bilinearly.
pub struct StrokeField<F> {
    base: F,
    target: StrokeTarget,
    camera: OrthoCamera,
    tau: f64,
}

impl<F: ScalarField> StrokeField<F> {
    pub fn new(base: F, target: StrokeTarget, camera: OrthoCamera, tau: f64) -> Self {
        Self {
            base,
            target,
            camera,
            tau,
        }
    }

    fn residual(&self, p: &Point3<f64>) -> f64 {
        let (u, v, _) = self.camera.project(p);
        self.target.residual_at(u, v)
    }

    fn weight(&self, gc: f64, p: &Point3<f64>) -> f64 {
        let band = (-(gc / self.tau).powi(2)).exp();
        if band == 0.0 {
            return 0.0;
        }
        let g = self.base.gradient(p);
        let len = g.norm();
        if len == 0.0 {
            return 0.0;
        }
        band * (-g.dot(&self.camera.toward_viewer()) / len).max(0.0)
    }
}

impl<F: ScalarField> ScalarField for StrokeField<F> {
    fn sample(&self, p: &Point3<f64>) -> f64 {
        let gc = self.base.sample(p);
        let r = self.residual(p);
        if r == 0.0 {
            return gc;
        }
        gc + r * self.weight(gc, p)
    }

    /// Base gradient plus the screen-space slope of the weighted residual;
    /// the slope of the weight itself is neglected.
    fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        let g = self.base.gradient(p);
        let (u, v, _) = self.camera.project(p);
        let t = &self.target;
        let (h, c) = (0.5, t.residual_at(u, v));
        let (l, r) = (t.residual_at(u - h, v), t.residual_at(u + h, v));
        let (up, dn) = (t.residual_at(u, v - h), t.residual_at(u, v + h));
        if c == 0.0 && l == 0.0 && r == 0.0 && up == 0.0 && dn == 0.0 {
            return g;
        }
        let w = self.weight(self.base.sample(p), p);
        let cam = &self.camera;
        // Raster u grows with screen x, raster v shrinks with screen y.
        let dx = (r - l) / (2.0 * h) * 0.5 * cam.width as f64;
        let dy = -(dn - up) / (2.0 * h) * 0.5 * cam.height as f64;
        let (right, upv, _) = cam.basis();
        g + (right * dx + upv * dy) * w
    }

    fn voxel_size(&self) -> Option<f64> {
        self.base.voxel_size()
    }

    /// The stroke term is at most |R|, so the base band is widened by it.
    fn sample_row(&self, origin: &Point3<f64>, step: f64, band: &[f64], out: &mut [f64]) {
        let at = |i: usize| origin + Vector3::new(i as f64 * step, 0.0, 0.0);
        let r: Vec<f64> = (0..out.len()).map(|i| self.residual(&at(i))).collect();
        let widened: Vec<f64> = band.iter().zip(&r).map(|(b, r)| b + r.abs()).collect();
        self.base.sample_row(origin, step, &widened, out);
        for (i, o) in out.iter_mut().enumerate() {
            if r[i] != 0.0 && o.abs() <= widened[i] {
                *o += r[i] * self.weight(*o, &at(i));
            }
        }
    }
}

/// Horn–Schunck estimate on the raw depth maps.
#[derive(Debug, Clone, Copy, Default)]
pub struct HornSchunckFlow;

impl FlowProvider for HornSchunckFlow {
    fn flow(&self, src: &DepthMap, dst: &DepthMap, _ctx: &ProviderContext) -> Result<FlowEstimate> {
        estimate_flow(src, dst)
    }
}
