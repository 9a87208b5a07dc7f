use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("track `{id}` has a duplicate timestamp at t={t}")]
    DuplicateTimestamp { id: String, t: f64 },

    #[error("demonstration contains no samples")]
    NoSamples,

    #[error("invalid sample in track `{id}`: {message}")]
    InvalidSample { id: String, message: String },

    #[error("more than one track of kind {0}")]
    DuplicateHand(String),

    #[error("track `{id}` needs at least {needed} samples, got {got}")]
    TooFewSamples { id: String, needed: usize, got: usize },

    #[error("track time ranges do not intersect")]
    EmptyIntersection,

    #[error("window centred at t={t} does not fit inside the track range")]
    WindowOutOfRange { t: f64 },

    #[error("demonstration is not on a shared uniform frame grid")]
    NotUniform,

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("series has {got} samples, {needed} required")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("demonstration has no hand track")]
    NoHands,

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("no signal coverage for `{a}`/`{b}` at frame {frame}")]
    MissingCoverage { a: String, b: String, frame: usize },

    #[error("actions for hand `{0}` overlap in time")]
    OverlappingActions(String),

    #[error("invalid script: {0}")]
    InvalidScript(String),

    #[error("need at least 2 shared subtasks, found {0}")]
    InsufficientOverlap(usize),

    #[error("attempt count is zero")]
    ZeroAttempts,

    #[error("rating {value} outside [1, {max}]")]
    RatingOutOfRange { value: f64, max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
