use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read config {path:?}: {source}")]
    ConfigIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing {path:?}: run the `{stage}` stage first")]
    MissingArtifact { stage: &'static str, path: PathBuf },

    #[error("cannot create output directory {path:?}: {source}")]
    OutputDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] hjbpod::Error),
}

impl PipelineError {
    /// Process exit status: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::ConfigIo { .. }
            | PipelineError::MissingArtifact { .. }
            | PipelineError::OutputDir { .. } => 4,
            PipelineError::Core(e) => match e {
                hjbpod::Error::Io { .. } | hjbpod::Error::Format { .. } | hjbpod::Error::Version { .. } => 4,
                hjbpod::Error::InvalidGrid(_) | hjbpod::Error::InvalidParameter { .. } => 2,
                _ => 3,
            },
        }
    }
}
