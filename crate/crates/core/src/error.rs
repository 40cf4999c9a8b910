use std::path::PathBuf;

use crate::gridworld::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("map line {line}, column {column}: unexpected character {found:?}")]
    MalformedCharacter { line: usize, column: usize, found: char },
    #[error("map line {line} has {found} cells, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("map is empty")]
    EmptyMap,
    #[error("map has no start marker")]
    NoStart,
    #[error("map has multiple starts")]
    MultipleStarts,
    #[error("start marker sits on an occupied cell")]
    StartOccupied,
    #[error("map border is not fully occupied")]
    OpenBorder,
    #[error("grid dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("collision with occupied cell ({}, {})", .0.x, .0.y)]
    Collision(Cell),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("zero-magnitude vector")]
    ZeroMagnitude,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("pgm: {0}")]
    Pgm(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
