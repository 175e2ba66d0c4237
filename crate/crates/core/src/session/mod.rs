//! Modeling session state: an input event log, the pipeline replay that
//! derives the meshes from it, and project files.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::coarse::{build_coarse, profile_depth_edit, CoarseParams, PartLayout, PartSketch};
use crate::error::{Error, Result};
use crate::geom::TriMesh;
use crate::idgmm::{refine_debug, stroke_preview, ProviderBundle, RefineConfig, RefineDiagnostics};
use crate::raster::{render_depth, DepthMap, NormalMap, OrthoCamera};
use crate::strokes::{with_mirrors, Stroke};

/// Version written to and required from project files.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    pub coarse: CoarseParams,
    pub refine: RefineConfig,
}

/// One user input. The project state is the fold of its events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// Replaces the coarse canvas layers.
    Sketch {
        sketch: PartSketch,
    },
    /// Replaces the part layout.
    Layout {
        layout: PartLayout,
    },
    /// Side-canvas target polyline, ordered top to bottom.
    Profile {
        target: Vec<[f64; 2]>,
    },
    /// Appends fine strokes; `symmetric` also adds their mirror images.
    Strokes {
        strokes: Vec<Stroke>,
        #[serde(default)]
        symmetric: bool,
    },
    ClearStrokes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    /// Milliseconds since the Unix epoch. Never affects replay.
    #[serde(default)]
    pub at_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEdit {
    pub at_ms: u64,
    pub target: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedStroke {
    pub at_ms: u64,
    pub stroke: Stroke,
}

/// Inputs of the pipeline after folding the log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectState {
    pub sketch: Option<PartSketch>,
    pub layout: PartLayout,
    pub profile_edits: Vec<ProfileEdit>,
    /// Mirror copies already expanded.
    pub strokes: Vec<TimedStroke>,
}

impl ProjectState {
    pub fn fold<'a>(events: impl IntoIterator<Item = &'a TimedEvent>) -> Self {
        let mut s = Self::default();
        for e in events {
            match &e.event {
                Event::Sketch { sketch } => s.sketch = Some(sketch.clone()),
                Event::Layout { layout } => s.layout = layout.clone(),
                Event::Profile { target } => s.profile_edits.push(ProfileEdit {
                    at_ms: e.at_ms,
                    target: target.clone(),
                }),
                Event::Strokes { strokes, symmetric } => {
                    let width = s.sketch.as_ref().map_or(512, |k| k.width);
                    let expanded = if *symmetric {
                        with_mirrors(strokes, width)
                    } else {
                        strokes.clone()
                    };
                    s.strokes.extend(
                        expanded
                            .into_iter()
                            .map(|stroke| TimedStroke { at_ms: e.at_ms, stroke }),
                    );
                }
                Event::ClearStrokes => s.strokes.clear(),
            }
        }
        s
    }

    pub fn stroke_list(&self) -> Vec<Stroke> {
        self.strokes.iter().map(|t| t.stroke.clone()).collect()
    }
}

/// Meshes derived from a project.
#[derive(Debug, Clone)]
pub struct Replay {
    pub coarse: TriMesh,
    pub fine: TriMesh,
    /// `None` when there were no strokes to refine.
    pub diagnostics: Option<RefineDiagnostics>,
}

/// Coarse mesh: layers → layout → merged mesh → profile edits in order.
pub fn replay_coarse(state: &ProjectState, config: &ProjectConfig) -> Result<TriMesh> {
    let sketch = state
        .sketch
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("project has no coarse sketch".into()))?;
    let mut mesh = build_coarse(sketch, &state.layout, &config.coarse)?;
    let side = OrthoCamera::side(sketch.width, sketch.height);
    for edit in &state.profile_edits {
        mesh = profile_depth_edit(&mesh, &edit.target, &side, config.coarse.profile_rings)?;
    }
    Ok(mesh)
}

/// Fine mesh: one refinement pass over the coarse mesh with every stroke.
/// A provider failure is an error here, unlike in `refine`.
pub fn replay_fine(
    coarse: &TriMesh,
    strokes: &[Stroke],
    config: &ProjectConfig,
    providers: &ProviderBundle,
    debug_dir: Option<&Path>,
) -> Result<(TriMesh, Option<RefineDiagnostics>)> {
    if strokes.is_empty() {
        return Ok((coarse.clone(), None));
    }
    let out = refine_debug(coarse, strokes, providers, &config.refine, debug_dir)?;
    if let Some(reason) = &out.diagnostics.error {
        return Err(Error::InvalidInput(format!("refinement failed: {reason}")));
    }
    Ok((out.mesh, Some(out.diagnostics)))
}

#[derive(Debug, Clone, Default)]
struct Cache {
    coarse: Option<(CoarseKey, TriMesh)>,
    depth: Option<(CoarseKey, usize, DepthMap)>,
    fine: Option<(FineKey, TriMesh, Option<RefineDiagnostics>)>,
}

#[derive(Debug, Clone, PartialEq)]
struct CoarseKey {
    sketch: Option<PartSketch>,
    layout: PartLayout,
    profile: Vec<Vec<[f64; 2]>>,
    params: CoarseParams,
}

#[derive(Debug, Clone, PartialEq)]
struct FineKey {
    coarse: CoarseKey,
    strokes: Vec<Stroke>,
    refine: RefineConfig,
}

/// Versioned modeling project. Equality ignores cached meshes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Project {
    pub version: u32,
    #[serde(default)]
    pub config: ProjectConfig,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
    #[serde(skip)]
    cache: Cache,
}

impl PartialEq for Project {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.config == other.config && self.events == other.events
    }
}

impl Default for Project {
    fn default() -> Self {
        Self::new(ProjectConfig::default())
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Project {
    pub fn new(config: ProjectConfig) -> Self {
        Self {
            version: SCHEMA_VERSION,
            config,
            events: Vec::new(),
            cache: Cache::default(),
        }
    }

    pub fn state(&self) -> ProjectState {
        ProjectState::fold(&self.events)
    }

    /// Validates and appends `event`, stamped with the current time.
    pub fn push(&mut self, event: Event) -> Result<()> {
        self.push_at(event, now_ms())
    }

    pub fn push_at(&mut self, event: Event, at_ms: u64) -> Result<()> {
        validate_event(&event)?;
        self.events.push(TimedEvent { at_ms, event });
        Ok(())
    }

    /// Drops the last event. Returns false when the log is empty.
    pub fn undo(&mut self) -> bool {
        self.events.pop().is_some()
    }

    /// Keeps the first `len` events.
    pub fn truncate(&mut self, len: usize) {
        self.events.truncate(len);
    }

    fn coarse_key(&self, state: &ProjectState) -> CoarseKey {
        CoarseKey {
            sketch: state.sketch.clone(),
            layout: state.layout.clone(),
            profile: state.profile_edits.iter().map(|e| e.target.clone()).collect(),
            params: self.config.coarse.clone(),
        }
    }

    /// M_c, recomputed only when its inputs changed.
    pub fn coarse_mesh(&mut self) -> Result<&TriMesh> {
        let state = self.state();
        let key = self.coarse_key(&state);
        if self.cache.coarse.as_ref().is_none_or(|(k, _)| *k != key) {
            let mesh = replay_coarse(&state, &self.config)?;
            self.cache.coarse = Some((key, mesh));
        }
        Ok(&self.cache.coarse.as_ref().unwrap().1)
    }

    /// M_f, recomputed only when its inputs changed.
    pub fn fine_mesh(&mut self, providers: &ProviderBundle) -> Result<(&TriMesh, Option<&RefineDiagnostics>)> {
        self.fine_mesh_debug(providers, None)
    }

    /// [`Project::fine_mesh`] that always recomputes when `debug_dir` is set,
    /// so the intermediate rasters get written.
    pub fn fine_mesh_debug(
        &mut self,
        providers: &ProviderBundle,
        debug_dir: Option<&Path>,
    ) -> Result<(&TriMesh, Option<&RefineDiagnostics>)> {
        let state = self.state();
        let key = FineKey {
            coarse: self.coarse_key(&state),
            strokes: state.stroke_list(),
            refine: self.config.refine.clone(),
        };
        let stale = self.cache.fine.as_ref().is_none_or(|(k, ..)| *k != key);
        if stale || debug_dir.is_some() {
            let coarse = self.coarse_mesh()?.clone();
            let (mesh, diag) = replay_fine(&coarse, &key.strokes, &self.config, providers, debug_dir)?;
            self.cache.fine = Some((key, mesh, diag));
        }
        let (_, mesh, diag) = self.cache.fine.as_ref().unwrap();
        Ok((mesh, diag.as_ref()))
    }

    /// The coarse mesh if it is cached and current.
    pub fn cached_coarse_mesh(&self) -> Option<&TriMesh> {
        let key = self.coarse_key(&self.state());
        self.cache.coarse.as_ref().filter(|(k, _)| *k == key).map(|(_, m)| m)
    }

    /// The fine mesh if it is cached and current.
    pub fn cached_fine_mesh(&self) -> Option<&TriMesh> {
        let state = self.state();
        let key = FineKey {
            coarse: self.coarse_key(&state),
            strokes: state.stroke_list(),
            refine: self.config.refine.clone(),
        };
        self.cache.fine.as_ref().filter(|(k, ..)| *k == key).map(|(_, m, _)| m)
    }

    /// Frontal depth of M_c at the refinement raster size.
    pub fn coarse_depth(&mut self) -> Result<&DepthMap> {
        let state = self.state();
        let key = self.coarse_key(&state);
        let raster = self.config.refine.raster;
        if self
            .cache
            .depth
            .as_ref()
            .is_none_or(|(k, r, _)| *k != key || *r != raster)
        {
            let mesh = self.coarse_mesh()?;
            let depth = render_depth(mesh, &OrthoCamera::front(raster, raster));
            self.cache.depth = Some((key, raster, depth));
        }
        Ok(&self.cache.depth.as_ref().unwrap().2)
    }

    /// Normal map of the cached coarse depth displaced by every stroke.
    pub fn preview(&mut self) -> Result<NormalMap> {
        let strokes = self.state().stroke_list();
        let (raster, amplitude) = (self.config.refine.raster, self.config.refine.amplitude);
        let depth = self.coarse_depth()?;
        Ok(stroke_preview(
            depth,
            &strokes,
            &OrthoCamera::front(raster, raster),
            amplitude,
        ))
    }

    /// Both meshes from scratch, ignoring the cache.
    pub fn replay(&self, providers: &ProviderBundle) -> Result<Replay> {
        let state = self.state();
        let coarse = replay_coarse(&state, &self.config)?;
        let (fine, diagnostics) = replay_fine(&coarse, &state.stroke_list(), &self.config, providers, None)?;
        Ok(Replay {
            coarse,
            fine,
            diagnostics,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a project file. The version is checked before the body so an
    /// old file reports a migration error rather than a field mismatch.
    pub fn from_json(json: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(json)?;
        if header.version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: header.version,
                expected: SCHEMA_VERSION,
            });
        }
        let project: Project = serde_json::from_str(json)?;
        for e in &project.events {
            validate_event(&e.event)?;
        }
        project.config.refine.validate()?;
        Ok(project)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn validate_event(event: &Event) -> Result<()> {
    match event {
        Event::Sketch { sketch } => sketch.validate(),
        Event::Layout { layout } => layout.validate(),
        Event::Profile { target } => {
            if target.len() < 2 || target.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(
                    "profile target needs at least 2 finite points".into(),
                ));
            }
            Ok(())
        }
        Event::Strokes { strokes, .. } => strokes.iter().try_for_each(Stroke::validate),
        Event::ClearStrokes => Ok(()),
    }
}

/// Writes `mesh` as ASCII OBJ.
pub fn export_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let text = mesh.to_obj_string()?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn import_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    TriMesh::read_obj(std::fs::File::open(path)?)
}

/// Face with two ears, an ear layout, a nose-bridge profile bump and three
/// detail strokes.
pub fn demo_project() -> Result<Project> {
    use crate::coarse::{circle_contour, side_profile, PartTransform, FACE, LEFT_EAR, RIGHT_EAR};

    let mut p = Project::default();
    let sketch = PartSketch::new(512, 512)
        .with_layer(FACE, circle_contour(256.0, 256.0, 128.0, 128))
        .with_layer(LEFT_EAR, circle_contour(116.0, 180.0, 40.0, 64))
        .with_layer(RIGHT_EAR, circle_contour(396.0, 180.0, 40.0, 64));
    p.push_at(Event::Sketch { sketch }, 0)?;
    let mut layout = PartLayout::default();
    for (name, x) in [(LEFT_EAR, 0.02), (RIGHT_EAR, -0.02)] {
        layout.transforms.insert(
            name.to_string(),
            PartTransform {
                translation: [x, 0.0, -0.08],
                scale: 0.9,
            },
        );
    }
    p.push_at(Event::Layout { layout }, 1)?;

    let profile = side_profile(p.coarse_mesh()?, &OrthoCamera::side(512, 512))?;
    let mid = 0.5 * (profile[0][1] + profile[profile.len() - 1][1]);
    let target = profile
        .iter()
        .map(|q| [q[0] - 10.0 * (-((q[1] - mid) / 25.0).powi(2)).exp(), q[1]])
        .collect();
    p.push_at(Event::Profile { target }, 2)?;

    let strokes = vec![
        Stroke::ridge(vec![[200.0, 190.0], [256.0, 180.0], [312.0, 190.0]], 0.6),
        Stroke::valley(vec![[215.0, 320.0], [256.0, 332.0], [297.0, 320.0]], 0.7),
    ];
    p.push_at(
        Event::Strokes {
            strokes,
            symmetric: false,
        },
        3,
    )?;
    let cheek = Stroke::ridge(vec![[180.0, 250.0], [200.0, 285.0]], 0.4);
    p.push_at(
        Event::Strokes {
            strokes: vec![cheek],
            symmetric: true,
        },
        4,
    )?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::{circle_contour, FACE};

    #[test]
    fn fold_applies_events_in_order() {
        let mut p = Project::default();
        let sketch = PartSketch::new(512, 512).with_layer(FACE, circle_contour(256.0, 256.0, 100.0, 64));
        p.push_at(Event::Sketch { sketch: sketch.clone() }, 1).unwrap();
        let s = Stroke::ridge(vec![[100.0, 100.0], [150.0, 100.0]], 0.5);
        p.push_at(
            Event::Strokes {
                strokes: vec![s.clone()],
                symmetric: true,
            },
            2,
        )
        .unwrap();
        let st = p.state();
        assert_eq!(st.sketch, Some(sketch));
        assert_eq!(st.stroke_list(), vec![s.clone(), s.mirrored(512)]);
        p.push_at(Event::ClearStrokes, 3).unwrap();
        assert!(p.state().strokes.is_empty());
        assert!(p.undo());
        assert_eq!(p.state().strokes.len(), 2);
    }

    #[test]
    fn invalid_events_are_refused() {
        let mut p = Project::default();
        let bad = Stroke::ridge(vec![[0.0, 0.0]], 0.5);
        assert!(p
            .push(Event::Strokes {
                strokes: vec![bad],
                symmetric: false
            })
            .is_err());
        assert!(p
            .push(Event::Profile {
                target: vec![[0.0, 0.0]]
            })
            .is_err());
        assert!(p.events.is_empty());
    }

    #[test]
    fn version_mismatch_names_migration() {
        let json = r#"{"version": 0, "events": []}"#;
        assert!(matches!(
            Project::from_json(json),
            Err(Error::Version { found: 0, expected: 1 })
        ));
    }

    #[test]
    fn coarse_mesh_needs_a_sketch() {
        assert!(Project::default().coarse_mesh().is_err());
    }
}
