//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any stage of the segmentation / recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty cloud")]
    EmptyCloud,

    #[error("voxel leaf size must be positive, got {0}")]
    NonPositiveLeaf(f64),

    #[error("cloud has {points} points but the operation needs at least {needed}")]
    TooFewPoints { points: usize, needed: usize },

    #[error("degenerate frame")]
    DegenerateFrame,

    #[error("cloud has no normals")]
    MissingNormals,

    #[error("keypoint index {index} out of range for cloud of {points} points")]
    KeypointOutOfRange { index: usize, points: usize },

    #[error("coordinates ({alpha}, {beta}) outside the descriptor support of half-length {half}")]
    OutOfSupport { alpha: f64, beta: f64, half: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("part {0:?} is already registered")]
    DuplicatePart(String),

    #[error("part {0:?} is not registered")]
    UnknownPart(String),

    #[error("word id {word} exceeds vocabulary size {vocab}")]
    WordOutOfRange { word: usize, vocab: usize },

    #[error("empty document")]
    EmptyDocument,

    #[error("empty minibatch")]
    EmptyMinibatch,

    #[error("registry has no parts")]
    EmptyRegistry,

    #[error("empty part label set")]
    EmptyPartSet,

    #[error("unknown object")]
    UnknownObject,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no part occurs in either prediction or ground truth")]
    EmptyUnion,

    #[error("dataset has no part annotations")]
    MissingAnnotations,

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid argument line: {0}")]
    ArgumentParse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
