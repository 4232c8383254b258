use std::path::PathBuf;

use crate::training::FitReport;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
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
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh is not watertight ({boundary_edges} boundary edges, {non_manifold_edges} non-manifold edges)")]
    NotWatertight {
        boundary_edges: usize,
        non_manifold_edges: usize,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("invalid grid file: {0}")]
    GridFormat(String),
    #[error("invalid model file: {0}")]
    ModelFormat(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("channel {channel} out of range for a model with {channels} channel(s)")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("grids do not share the same lattice")]
    LatticeMismatch,
    #[error("surface sampling failed: {0}")]
    Sampling(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged {
        epoch: usize,
        loss: f64,
        report: Box<FitReport>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
