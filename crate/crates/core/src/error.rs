use thiserror::Error;

use crate::behaviour::{SignallingWitness, ValidationReport};
use crate::lp::SolverError;

/// Every failure the library can report.
///
/// Structural errors (wrong shapes, bad indices) are kept apart from
/// probabilistic invalidity so callers can tell a malformed file from a
/// well-formed table that simply is not a behaviour.
#[derive(Debug, Error)]
pub enum BellError {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid behaviour: {0}")]
    InvalidBehaviour(ValidationReport),

    #[error("behaviour is signalling: {0}")]
    Signalling(SignallingWitness),

    #[error("expected {expected} settings per party, got {got_a}x{got_b}")]
    WrongSettingCount {
        expected: usize,
        got_a: usize,
        got_b: usize,
    },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{count} deterministic vertices exceed the cap of {cap}")]
    VertexCap { count: u128, cap: usize },

    #[error("hidden-variable model error: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl BellError {
    /// Short machine-readable tag, used for the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            BellError::Structural(_) => "structural",
            BellError::InvalidBehaviour(_) => "invalid_behaviour",
            BellError::Signalling(_) => "signalling",
            BellError::WrongSettingCount { .. } => "wrong_setting_count",
            BellError::IndexOutOfRange(_) => "index_out_of_range",
            BellError::Domain(_) => "domain",
            BellError::VertexCap { .. } => "vertex_cap",
            BellError::Model(_) => "model",
            BellError::Config(_) => "config",
            BellError::Solver(_) => "solver",
            BellError::Json(_) => "json",
            BellError::Io(_) => "io",
        }
    }
}

pub type Result<T, E = BellError> = std::result::Result<T, E>;
