use thiserror::Error;

/// Pipeline stage names used in abort reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Template,
    Nibble,
    Cover,
    Hole,
    Completion,
    Shuffle,
    Assembly,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Template => "template",
            Stage::Nibble => "nibble",
            Stage::Cover => "cover",
            Stage::Hole => "hole",
            Stage::Completion => "completion",
            Stage::Shuffle => "shuffle",
            Stage::Assembly => "assembly",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("graph is not tridivisible: {0}")]
    NotTridivisible(String),

    #[error("graph containment violated: {0}")]
    Containment(String),

    #[error("{stage} stage aborted at step {step}: {detail}")]
    StageAbort { stage: Stage, step: usize, detail: String },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn abort(stage: Stage, step: usize, detail: impl Into<String>) -> Self {
        Error::StageAbort {
            stage,
            step,
            detail: detail.into(),
        }
    }

    /// True for errors that a fresh random attempt may avoid.
    pub fn is_stage_abort(&self) -> bool {
        matches!(self, Error::StageAbort { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
