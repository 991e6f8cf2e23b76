use crate::cue::Cue;
use crate::graph::EvalTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    /// A manifest line failed to parse; carries file and line context.
    #[error("{path}:{line}: manifest parse error: {message}")]
    ManifestParse {
        path: String,
        line: usize,
        message: String,
    },

    /// A loaded record violates a type invariant.
    #[error("segment {segment_id}: {field}: {message}")]
    Invariant {
        segment_id: String,
        field: String,
        message: String,
    },

    /// A cue query failed during graph evaluation; carries the partial trace
    /// accumulated before the failure.
    #[error("cue {cue} query failed for segment {segment_id}: {source}")]
    CueQuery {
        segment_id: String,
        cue: Cue,
        #[source]
        source: Box<Error>,
        trace: Box<EvalTrace>,
    },

    #[error("backend {backend_id}: segment {segment_id}, target {target}: {detail}")]
    Backend {
        backend_id: String,
        segment_id: String,
        target: String,
        detail: String,
    },

    /// No yes/no verdict could be extracted from a model response.
    #[error("no yes/no verdict found in response: {raw:?}")]
    AnswerParse { raw: String },

    #[error("cache miss for key {key}")]
    CacheMiss { key: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Error {
        Error::Validation(msg.into())
    }
}
