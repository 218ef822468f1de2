use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate geometry: sphere of radius {radius} penetrates opposing faces along axis {axis}")]
    GeometryDegenerate { axis: usize, radius: f64 },

    #[error("could not place launcher and drone after {attempts} attempts")]
    PlacementInfeasible { attempts: usize },

    #[error("insufficient observations: {0}")]
    InsufficientObservations(&'static str),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty batch")]
    EmptyBatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("stale forward cache (cache from parameter version {cache}, network at {net})")]
    StaleCache { cache: u64, net: u64 },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("length mismatch: path has {path} points, forecast has {forecast}")]
    LengthMismatch { path: usize, forecast: usize },

    #[error("degenerate direction: object and agent positions coincide")]
    DegenerateDirection,

    #[error("missing checkpoint for method {method}: {what}")]
    MissingCheckpoint { method: String, what: String },

    #[error("episode aborted at step {step}: {reason}")]
    EpisodeAborted { step: usize, reason: String },

    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
