use std::path::PathBuf;

use crate::detections::FrameKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no superclass mapping for category `{0}`")]
    UnmappedCategory(String),

    #[error("frame mismatch: {left} vs {right}")]
    FrameMismatch { left: FrameKey, right: FrameKey },

    #[error("labeled frame {0} has no ground-truth entry")]
    MissingGroundTruth(FrameKey),

    #[error("ground truth contains no boxes")]
    EmptyGroundTruth,

    #[error("ground truth carries no track ids")]
    NoTracks,

    #[error("duplicate track id `{track_id}` in frame {frame}")]
    DuplicateTrack { frame: FrameKey, track_id: String },

    #[error("detector `{0}` appears in more than one input")]
    DuplicateDetector(String),

    #[error("invalid noise profile: {0}")]
    InvalidProfile(String),

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error("invalid record at {location}: {reason}")]
    InvariantViolation { location: String, reason: String },

    #[error("duplicate record at {0}")]
    DuplicateRecord(String),

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

    /// True for malformed input and IO failures, false for well-formed input
    /// that breaks a domain rule.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. })
    }
}
