use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("joint coordinate is not finite")]
    NonFinite,
    #[error("expected 60 coordinates per frame, got {0}")]
    WrongWidth(usize),
    #[error("gesture sequence has no frames")]
    EmptySequence,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// Spine midpoint and both shoulders are (nearly) collinear.
    #[error("degenerate frame: body plane undefined (|CR x CL| = {cross_norm:e})")]
    DegenerateFrame { cross_norm: f64 },
    /// Body-plane normal is (nearly) vertical, so its XZ projection vanishes.
    #[error("degenerate projection: body plane is horizontal (|p| = {projection_norm:e})")]
    DegenerateProjection { projection_norm: f64 },
    #[error("frame {frame}: {source}")]
    InSequence {
        frame: usize,
        #[source]
        source: Box<GeometryError>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("trace does not match model: {0}")]
    TraceMismatch(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need at least 2 distinct signers, found {0}")]
    InsufficientSigners(usize),
    #[error("need at least 2 classes, found {0}")]
    InsufficientClasses(usize),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// File format errors. Every variant names the file and, where one applies,
/// the 1-based line.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: malformed manifest: {reason}", path.display())]
    MalformedManifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}:{line}: malformed gesture: {reason}", path.display())]
    MalformedGesture {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}:{line}: unsupported model version {found:?}", path.display())]
    VersionMismatch {
        path: PathBuf,
        line: usize,
        found: String,
    },
    #[error("{}:{line}: tensor shape mismatch: {reason}", path.display())]
    TensorShapeMismatch {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}:{line}: truncated file: {reason}", path.display())]
    TruncatedFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> DataError {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1-based line the error points at, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            DataError::Io { .. } => None,
            DataError::MalformedManifest { line, .. }
            | DataError::MalformedGesture { line, .. }
            | DataError::VersionMismatch { line, .. }
            | DataError::TensorShapeMismatch { line, .. }
            | DataError::TruncatedFile { line, .. } => Some(*line),
        }
    }
}
