use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-side contract was broken (bad coordinate, bad parameter, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("seed volume is empty")]
    EmptySeeds,

    #[error("{count} seed voxels lie outside the flooding mask")]
    SeedOutsideMask { count: usize },

    #[error("inside and outside seed masks overlap on {count} voxels")]
    SeedOverlap { count: usize },

    #[error("no chords found for the requested phase and directions")]
    NoChords,

    #[error("descriptor curves are not comparable: {0}")]
    CurveMismatch(String),

    #[error("sweep produced {successes} successful steps, at least 2 are required")]
    InsufficientSweep { successes: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("component `{name}`: {source}")]
    Component {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
