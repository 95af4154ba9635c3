use thiserror::Error;

/// Errors produced by the samplers, analytics, training kernel and codecs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("rect {rect_w}x{rect_h} does not fit inside a {img_w}x{img_h} image")]
    RectTooLarge {
        rect_w: u32,
        rect_h: u32,
        img_w: u32,
        img_h: u32,
    },

    #[error("zero-norm vector (degenerate embedding at row {row})")]
    ZeroNorm { row: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero standard deviation in channel {channel}")]
    ZeroStd { channel: usize },

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// `Ok` when `issues` is empty, otherwise the first issue.
pub(crate) fn first_issue(issues: Vec<Error>) -> Result<()> {
    issues.into_iter().next().map_or(Ok(()), Err)
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
