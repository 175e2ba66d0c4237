//! Batch entry points: coarse and full pipeline runs, the extraction
//! benchmark, the invariant suite and corpus queries.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sketchface::bench::{mc_vs_idgmm, BenchShape};
use sketchface::coarse::{CoarseParams, SketchDocument};
use sketchface::error::Error;
use sketchface::geom::TriMesh;
use sketchface::idgmm::ProviderBundle;
use sketchface::session::{export_obj, import_obj, Project};
use sketchface::suggest::{SuggestionIndex, SuggestionQuery};
use sketchface::verify;

#[derive(Parser)]
#[command(
    name = "sketchface",
    version,
    about = "Sketch-based face modeling from the command line"
)]
struct Cli {
    /// Print one JSON object on stdout instead of text, errors included.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inflate and merge the parts of a sketch file.
    Coarse {
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a project and write the refined mesh.
    Refine {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write every intermediate map and mesh here.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
    },
    /// Replay a project end to end: coarse, profile edits, refinement.
    Pipeline {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the coarse mesh.
        #[arg(long)]
        coarse_out: Option<PathBuf>,
    },
    /// Timing comparisons.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Run the invariant checks; exits nonzero if any fails.
    Verify {
        /// Only checks whose `module/name` contains this text.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Rank corpus entries against a query file.
    SuggestIndex {
        /// Corpus JSON; the bundled corpus when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        query: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Dense marching cubes of the fine field against one refinement pass.
    McVsIdgmm {
        #[arg(long, value_enum, default_value = "sphere")]
        field: FieldKind,
        /// OBJ mesh for `--field file`.
        #[arg(long, required_if_eq("field", "file"))]
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldKind {
    Sphere,
    Ellipsoid,
    File,
}

enum Failure {
    Core(Error),
    Checks(usize),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Checks(_) => 1,
            Failure::Core(Error::Io(_) | Error::Image(_)) => 4,
            Failure::Core(
                Error::Parse { .. }
                | Error::Version { .. }
                | Error::InvalidInput(_)
                | Error::Part { .. }
                | Error::UnknownPart(_)
                | Error::DuplicateId(_),
            ) => 3,
            Failure::Core(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Core(e) => json!({ "error": e.kind(), "message": e.to_string() }),
            Failure::Checks(n) => json!({ "error": "checks_failed", "message": format!("{n} checks failed") }),
        }
    }
}

/// What a command reports: a text rendering and its JSON twin.
struct Report {
    text: String,
    json: Value,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(r) => {
            if cli.json {
                println!("{}", r.json);
            } else if !r.text.is_empty() {
                println!("{}", r.text);
            }
            ExitCode::SUCCESS
        }
        Err((f, partial)) => {
            if cli.json {
                let mut out = f.to_json();
                if let Some(r) = partial {
                    out["details"] = r.json;
                }
                println!("{out}");
            } else {
                if let Some(r) = partial {
                    println!("{}", r.text);
                }
                match &f {
                    Failure::Core(e) => eprintln!("error: {e}"),
                    Failure::Checks(n) => eprintln!("{n} checks failed"),
                }
            }
            ExitCode::from(f.exit_code())
        }
    }
}

/// On failure, optionally carries the partial report (the failing checks).
fn run(command: &Command) -> Result<Report, (Failure, Option<Report>)> {
    let plain = |e: Error| (Failure::Core(e), None);
    match command {
        Command::Coarse { sketch, out } => coarse(sketch, out).map_err(plain),
        Command::Refine {
            project,
            out,
            debug_dir,
        } => refine(project, out, debug_dir.as_deref()).map_err(plain),
        Command::Pipeline {
            project,
            out,
            coarse_out,
        } => pipeline(project, out, coarse_out.as_deref()).map_err(plain),
        Command::Bench {
            which: BenchCommand::McVsIdgmm { field, path, grid, csv },
        } => bench(*field, path.as_deref(), *grid, csv.as_deref()).map_err(plain),
        Command::Verify { filter } => run_verify(filter.as_deref()),
        Command::SuggestIndex { corpus, query } => suggest(corpus.as_deref(), query).map_err(plain),
    }
}

fn mesh_json(path: &Path, mesh: &TriMesh) -> Value {
    json!({
        "path": path,
        "vertices": mesh.vertices.len(),
        "triangles": mesh.triangles.len(),
        "watertight": mesh.is_watertight(),
    })
}

fn wrote(path: &Path, mesh: &TriMesh) -> String {
    format!(
        "wrote {}: {} vertices, {} triangles",
        path.display(),
        mesh.vertices.len(),
        mesh.triangles.len()
    )
}

fn coarse(sketch: &Path, out: &Path) -> Result<Report, Error> {
    let start = Instant::now();
    let mesh = SketchDocument::load(sketch)?.build(&CoarseParams::default())?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    export_obj(&mesh, out)?;
    Ok(Report {
        text: wrote(out, &mesh),
        json: json!({ "mesh": mesh_json(out, &mesh), "ms": ms }),
    })
}

fn refine(project: &Path, out: &Path, debug_dir: Option<&Path>) -> Result<Report, Error> {
    let mut p = Project::load(project)?;
    let start = Instant::now();
    let (mesh, diag) = p.fine_mesh_debug(&ProviderBundle::procedural(), debug_dir)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    export_obj(mesh, out)?;
    Ok(Report {
        text: wrote(out, mesh),
        json: json!({ "mesh": mesh_json(out, mesh), "ms": ms, "diagnostics": diag }),
    })
}

fn pipeline(project: &Path, out: &Path, coarse_out: Option<&Path>) -> Result<Report, Error> {
    let p = Project::load(project)?;
    let start = Instant::now();
    let replay = p.replay(&ProviderBundle::procedural())?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    export_obj(&replay.fine, out)?;
    let mut text = wrote(out, &replay.fine);
    let mut report = json!({ "mesh": mesh_json(out, &replay.fine), "ms": ms, "diagnostics": replay.diagnostics });
    if let Some(c) = coarse_out {
        export_obj(&replay.coarse, c)?;
        text = format!("{}\n{text}", wrote(c, &replay.coarse));
        report["coarse"] = mesh_json(c, &replay.coarse);
    }
    Ok(Report { text, json: report })
}

fn bench(field: FieldKind, path: Option<&Path>, grid: usize, csv: Option<&Path>) -> Result<Report, Error> {
    if grid < 8 {
        return Err(Error::InvalidInput(format!("grid {grid} is below 8")));
    }
    let shape = match field {
        FieldKind::Sphere => BenchShape::Sphere,
        FieldKind::Ellipsoid => BenchShape::Ellipsoid,
        FieldKind::File => BenchShape::Mesh(import_obj(
            path.ok_or_else(|| Error::InvalidInput("--path is required".into()))?,
        )?),
    };
    let report = mc_vs_idgmm(&shape, grid, &ProviderBundle::procedural(), &Default::default())?;
    let table = report.to_csv();
    let summary = format!(
        "speedup {:.2}x ({} coarse vertices)",
        report.speedup(),
        report.coarse_vertices
    );
    let text = match csv {
        Some(p) => {
            std::fs::write(p, &table)?;
            format!("wrote {}\n{summary}", p.display())
        }
        None => format!("{}{summary}", table),
    };
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["speedup"] = json!(report.speedup());
    Ok(Report { text, json: value })
}

fn run_verify(filter: Option<&str>) -> Result<Report, (Failure, Option<Report>)> {
    let checks = verify::run(filter);
    let text = checks
        .iter()
        .map(|c| {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            format!("{verdict} {}/{} ({:.0} ms) {}", c.module, c.name, c.ms, c.detail)
        })
        .collect::<Vec<_>>()
        .join("\n");
    let failed = checks.iter().filter(|c| !c.passed).count();
    let value = json!({ "checks": checks, "failed": failed });
    let report = Report { text, json: value };
    if failed > 0 {
        return Err((Failure::Checks(failed), Some(report)));
    }
    Ok(report)
}

fn suggest(corpus: Option<&Path>, query: &Path) -> Result<Report, Error> {
    let index = match corpus {
        Some(p) => SuggestionIndex::load(p)?,
        None => SuggestionIndex::builtin(),
    };
    let q: SuggestionQuery = serde_json::from_str(&std::fs::read_to_string(query)?)?;
    let hits = index.query(&q);
    let text = hits
        .iter()
        .map(|h| format!("{} {} {:.6}", h.rank, h.id, h.distance))
        .collect::<Vec<_>>()
        .join("\n");
    let ranked: Vec<Value> = hits
        .iter()
        .map(|h| json!({ "rank": h.rank, "id": h.id, "style": h.style, "distance": h.distance }))
        .collect();
    Ok(Report {
        text,
        json: json!({ "suggestions": ranked }),
    })
}
