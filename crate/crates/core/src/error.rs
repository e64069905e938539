use std::path::PathBuf;

use crate::mesh::Defect;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mesh file {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unsupported mesh format for {0} (expected .obj or .ply)")]
    UnsupportedFormat(PathBuf),

    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("mesh failed validation with {} defect(s): {defects:?}", defects.len())]
    InvalidMesh { defects: Vec<Defect> },

    #[error("labeling has {got} face labels but the mesh has {expected} faces")]
    LabelCountMismatch { expected: usize, got: usize },

    #[error("invalid labeling: {0}")]
    InvalidLabeling(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("cannot build abstracted mesh: {0}")]
    Abstraction(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("linear solve failed: {0}")]
    Factorization(String),

    #[error("missing landmark `{0}`")]
    MissingLandmark(String),

    #[error("degenerate landmark configuration: {0}")]
    DegenerateLandmarks(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
