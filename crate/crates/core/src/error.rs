use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is not valid UTF-8: {0}")]
    InvalidUtf8(#[from] std::str::Utf8Error),

    #[error("coordinate out of range: {0}")]
    InvalidRange(String),

    #[error("post `{0}` has no geo-coordinates")]
    MissingGeo(String),

    #[error("post `{0}` has no timestamp")]
    MissingTime(String),

    #[error("post `{0}` is invalid: {1}")]
    InvalidPost(String, String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0} must be positive")]
    NonPositiveDelta(&'static str),

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("pattern {id} does not compile: {source}")]
    Pattern {
        id: u32,
        #[source]
        source: regex::Error,
    },

    #[error("duplicate pattern id {0}")]
    DuplicatePatternId(u32),

    #[error("classifier `{0}` is already registered")]
    DuplicateName(String),

    #[error("no classifier registered as `{0}`")]
    UnknownPlugin(String),

    #[error("classifier failed on post `{id}`: {reason}")]
    PluginFailure { id: String, reason: String },

    #[error("index needs at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },

    #[error("dimension {dim} is not divisible by pq_m = {m}")]
    DimNotDivisible { dim: usize, m: usize },

    #[error("index and oracle cover different corpora: {0}")]
    CorpusMismatch(String),

    #[error("offer corpus is empty")]
    EmptyOfferCorpus,

    #[error("no embedding for ids: {}", .0.join(", "))]
    EmbeddingMissing(Vec<String>),

    #[error("result for unknown request `{0}`")]
    UnknownRequestId(String),

    #[error("post `{0}` has no `{1}` value to group by")]
    MissingGroupKey(String, &'static str),

    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
