//! Wall-time comparison of dense isosurface extraction of the fine field
//! against one refinement pass that deforms the coarse mesh instead.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::field::{EllipsoidField, SphereField};
use crate::geom::{marching_cubes, Aabb, ExactMeshField, ScalarField, TriMesh};
use crate::idgmm::{refine, ProviderBundle, ProviderContext, RefineConfig, StrokeTarget};
use crate::raster::{render_depth, OrthoCamera};
use crate::strokes::{draw_strokes, render_contours, stroke_displacement_field, Stroke};

/// Lattice of the coarse mesh the refinement starts from.
pub const COARSE_GRID: usize = 64;

#[derive(Debug, Clone)]
pub enum BenchShape {
    Sphere,
    Ellipsoid,
    Mesh(TriMesh),
}

impl FromStr for BenchShape {
    type Err = Error;

    /// `sphere`, `ellipsoid`; meshes are loaded by the caller.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "ellipsoid" => Ok(Self::Ellipsoid),
            other => Err(Error::InvalidInput(format!("unknown bench field `{other}`"))),
        }
    }
}

impl BenchShape {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Ellipsoid => "ellipsoid",
            Self::Mesh(_) => "file",
        }
    }

    fn base_field(&self) -> Result<Box<dyn ScalarField>> {
        Ok(match self {
            Self::Sphere => Box::new(SphereField::new(Point3::origin(), 0.8)),
            Self::Ellipsoid => Box::new(EllipsoidField::new(Point3::origin(), Vector3::new(0.75, 0.9, 0.65))),
            Self::Mesh(m) => Box::new(ExactMeshField::new(m, COARSE_GRID)?),
        })
    }
}

/// One CSV line: `method,grid,wall_ms,vertices,triangles`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    pub grid: usize,
    pub wall_ms: f64,
    pub vertices: usize,
    pub triangles: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub shape: &'static str,
    pub coarse_vertices: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, method: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Extraction time over refinement time.
    pub fn speedup(&self) -> f64 {
        match (self.row("mc"), self.row("idgmm")) {
            (Some(mc), Some(ours)) if ours.wall_ms > 0.0 => mc.wall_ms / ours.wall_ms,
            _ => f64::NAN,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,grid,wall_ms,vertices,triangles\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.3},{},{}\n",
                r.method, r.grid, r.wall_ms, r.vertices, r.triangles
            ));
        }
        out
    }
}

/// Forehead ridge, nose-bridge ridge, mouth valley and two cheek ridges.
pub fn bench_strokes(raster: usize) -> Vec<Stroke> {
    let s = raster as f64 / 512.0;
    let scale = |pts: &[[f64; 2]]| pts.iter().map(|p| [p[0] * s, p[1] * s]).collect::<Vec<_>>();
    vec![
        Stroke::ridge(scale(&[[180.0, 170.0], [256.0, 155.0], [332.0, 170.0]]), 0.7),
        Stroke::ridge(scale(&[[256.0, 200.0], [256.0, 290.0]]), 0.8),
        Stroke::valley(scale(&[[200.0, 350.0], [256.0, 365.0], [312.0, 350.0]]), 0.7),
        Stroke::ridge(scale(&[[160.0, 250.0], [180.0, 300.0]]), 0.5),
        Stroke::ridge(scale(&[[352.0, 250.0], [332.0, 300.0]]), 0.5),
    ]
}

/// Marching cubes at `grid`³ over the fine field against one refinement
/// pass, both starting from the same 64³ coarse mesh and strokes.
///
/// The extraction row includes building the fine field, exactly as the
/// refinement builds it; the refinement row is the whole `refine` call.
pub fn mc_vs_idgmm(
    shape: &BenchShape,
    grid: usize,
    providers: &ProviderBundle,
    cfg: &RefineConfig,
) -> Result<BenchReport> {
    let coarse = marching_cubes(shape.base_field()?.as_ref(), COARSE_GRID, Aabb::unit());
    if !coarse.is_watertight() || coarse.is_empty() {
        return Err(Error::InvalidMesh("coarse extraction is not a closed surface".into()));
    }
    let strokes = bench_strokes(cfg.raster);

    let start = Instant::now();
    let field = fine_field(&coarse, &strokes, providers, cfg)?;
    let dense = marching_cubes(field.as_ref(), grid, Aabb::unit());
    let mc_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let refined = refine(&coarse, &strokes, providers, cfg)?;
    let ours_ms = start.elapsed().as_secs_f64() * 1e3;
    if let Some(e) = refined.diagnostics.error {
        return Err(Error::InvalidInput(format!("refinement failed: {e}")));
    }

    Ok(BenchReport {
        shape: shape.name(),
        coarse_vertices: coarse.vertices.len(),
        rows: vec![
            BenchRow {
                method: "mc",
                grid,
                wall_ms: mc_ms,
                vertices: dense.vertices.len(),
                triangles: dense.triangles.len(),
            },
            BenchRow {
                method: "idgmm",
                grid: cfg.field_resolution,
                wall_ms: ours_ms,
                vertices: refined.mesh.vertices.len(),
                triangles: refined.mesh.triangles.len(),
            },
        ],
    })
}

/// The field the refinement's implicit update follows, built the same way.
pub fn fine_field(
    coarse: &TriMesh,
    strokes: &[Stroke],
    providers: &ProviderBundle,
    cfg: &RefineConfig,
) -> Result<Arc<dyn ScalarField>> {
    let cam = OrthoCamera::front(cfg.raster, cfg.raster);
    let mut sketch = render_contours(coarse, &cam);
    draw_strokes(&mut sketch, strokes);
    let depth = render_depth(coarse, &cam);
    let target = StrokeTarget::new(
        &depth,
        stroke_displacement_field(strokes, cam.width, cam.height, cfg.amplitude),
    );
    let ctx = ProviderContext {
        camera: &cam,
        config: cfg,
        target: &target,
    };
    let normals = providers.normal_synth.synthesize(&sketch, &depth, &ctx)?;
    providers.sdf_provider.field(&normals, &sketch, coarse, &ctx)
}
