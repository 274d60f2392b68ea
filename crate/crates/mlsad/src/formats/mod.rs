//! Readers and writers for every on-disk format the pipeline uses.

pub mod models;
pub mod rttm;
pub mod spm;
pub mod track;

use std::path::PathBuf;

pub use models::{
    read_lr_model, read_toy_model, write_lr_model, write_toy_model, write_training_log,
};
pub use rttm::{read_rttm, read_uem, write_rttm, write_uem};
pub use spm::{read_spm, write_spm, SpmHeader, SpmMeta};
pub use track::{read_track, write_track};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"SPM1\"")]
    BadMagic([u8; 4]),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("file has {extra} bytes past the declared payload")]
    TrailingBytes { extra: usize },
    #[error("frame step must be positive")]
    ZeroFrameStep,
    #[error("frame step {0} s is not representable in whole microseconds")]
    FrameStepPrecision(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing `#frame_step=` header")]
    MissingHeader,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] mlsad_core::Error),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;
