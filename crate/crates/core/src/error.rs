use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate (lat {lat}, lon {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("referential integrity: {context} references unknown segment {id}")]
    ReferentialIntegrity { id: u64, context: String },

    #[error("unknown segment {0}")]
    MissingSegment(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no open candidate from segment {0} (dead end)")]
    DeadEnd(u64),

    #[error("masked softmax with all-zero mask")]
    NoCandidate,

    #[error("candidate {0} is not an open successor")]
    InfeasibleCandidate(u64),

    #[error("node {0} has an empty neighborhood and no self-loop")]
    IsolatedNode(u64),

    #[error("search budget exhausted after {expanded} expansions ({from} -> {to})")]
    SearchBudget { expanded: usize, from: u64, to: u64 },

    #[error("destination {to} unreachable from {from}")]
    Unreachable { from: u64, to: u64 },

    #[error("two-stage generation failed at {leg}: {source}")]
    TwoStage {
        leg: String,
        #[source]
        source: Box<Error>,
    },

    #[error("no boundary segment between regions {from} and {to}")]
    EmptyBoundary { from: u32, to: u32 },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("corpus rejected: {0}")]
    BadCorpus(String),

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code family for the CLI.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidArgument(_) | InvalidCoordinate { .. } => 2,
            Parse { .. } | Io(_) | Checkpoint(_) | MissingCheckpoint(_) => 3,
            ReferentialIntegrity { .. }
            | MissingSegment(_)
            | BadCorpus(_)
            | EmptyCorpus
            | EmptyInput(_) => 4,
            DeadEnd(_)
            | NoCandidate
            | InfeasibleCandidate(_)
            | SearchBudget { .. }
            | Unreachable { .. }
            | TwoStage { .. }
            | EmptyBoundary { .. } => 5,
            Numeric(_) | ShapeMismatch { .. } | IndexOutOfRange { .. } | IsolatedNode(_) => 6,
        }
    }
}
