use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes and
/// HTTP statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed files, unknown ids, bad arguments.
    Input,
    /// Degenerate geometry or diverged optimization.
    Numeric,
    /// Operating-system level I/O failures.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is behind the camera (depth {depth:.3e})")]
    BehindCamera { depth: f64 },
    #[error("degenerate axes: {0}")]
    DegenerateAxes(&'static str),
    #[error("degenerate baseline: rays are parallel or camera centers coincide")]
    DegenerateBaseline,
    #[error("degenerate orientation: face normal within {min_deg} deg of gravity")]
    DegenerateOrientation { min_deg: f64 },
    #[error("invalid pixel span {0}")]
    InvalidSpan(f64),
    #[error("warp canvas {width}x{height} exceeds the {cap}x{cap} cap")]
    OversizedWarp { width: f64, height: f64, cap: u32 },
    #[error("singular warp homography")]
    SingularWarp,
    #[error("strip is {0} px wide after height normalization")]
    StripTooWide(u32),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("unknown {what} '{id}'")]
    NotFound { what: &'static str, id: String },
    #[error("face move rejected: {0}")]
    InvalidMove(String),
    #[error("scene axes have not been set")]
    AxesNotSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::BehindCamera { .. }
            | Error::DegenerateAxes(_)
            | Error::DegenerateBaseline
            | Error::DegenerateOrientation { .. }
            | Error::InvalidSpan(_)
            | Error::OversizedWarp { .. }
            | Error::SingularWarp
            | Error::Diverged { .. } => ErrorKind::Numeric,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Input,
        }
    }
}
