use thiserror::Error;

/// Errors raised by the modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh is not closed: {boundary_edges} boundary edges")]
    OpenMesh { boundary_edges: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("part `{part}`: {reason}")]
    Part { part: String, reason: String },

    #[error("unknown part `{0}`")]
    UnknownPart(String),

    #[error("degenerate silhouette: {0} vertices")]
    DegenerateSilhouette(usize),

    #[error("provider `{provider}` failed: {reason}")]
    Provider { provider: &'static str, reason: String },

    #[error("duplicate suggestion id `{0}`")]
    DuplicateId(String),

    #[error("project schema version {found} is not supported (expected {expected}); migration required")]
    Version { found: u32, expected: u32 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OpenMesh { .. } => "open_mesh",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::LatticeMismatch(_) => "lattice_mismatch",
            Error::Singular(_) => "singular",
            Error::InvalidInput(_) => "invalid_input",
            Error::Part { .. } => "invalid_part",
            Error::UnknownPart(_) => "unknown_part",
            Error::DegenerateSilhouette(_) => "degenerate_silhouette",
            Error::Provider { .. } => "provider",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Version { .. } => "unsupported_version",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
