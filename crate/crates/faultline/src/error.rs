use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    /// No crash stack could be located in a sanitizer report. Carries the
    /// byte offset just past the last line that parsed successfully.
    #[error("no crash stack found in report (parsed up to byte {offset})")]
    Parse { offset: usize },

    /// An interchange document violated its schema.
    #[error("schema violation at record {index}: {reason}")]
    Schema { index: usize, reason: String },

    /// None of the requested anchor symbols resolved to a call-graph node.
    #[error("no anchor symbol resolved to a call-graph node")]
    EmptyAnchorSet,

    /// A trace family with zero traces has no occurrence statistics.
    #[error("trace family is empty")]
    EmptyFamily,

    /// An external adapter (fuzzer or language model) failed.
    #[error("adapter failure: {0}")]
    Adapter(String),

    /// A numeric argument left its documented range.
    #[error("value out of range: {0}")]
    Domain(String),

    /// The rating protocol was violated (wrong rater count, incomplete
    /// store, premature unseal, and similar).
    #[error("rating protocol violation: {0}")]
    Protocol(String),

    /// An agreement table puts all mass in one category, so chance
    /// agreement is 1 and kappa is undefined.
    #[error("degenerate agreement table: all mass in one category")]
    Degenerate,

    /// The prompt template or its inputs are unusable.
    #[error("prompt template error: {0}")]
    Template(String),

    /// An edit targeted a file in the protected set.
    #[error("refusing to edit protected file {0}")]
    ProtectedFile(PathBuf),

    /// A tool path escaped the working-copy root.
    #[error("path {0} escapes the working copy root")]
    PathEscape(PathBuf),

    /// An oracle stage exceeded its configured time limit.
    #[error("oracle stage `{stage}` exceeded its time limit")]
    OracleTimeout { stage: String },

    /// Pairwise rubric labels tie and no human tiebreak verdict exists.
    #[error("quality labels tie and no human tiebreak verdict is recorded")]
    MissingTiebreak,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("interchange document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
