use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants are grouped loosely by the layer that raises them so the CLI can
/// map them onto distinct exit codes (see [`Error::kind`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error")]
    Csv(#[from] csv::Error),
    #[error("json error")]
    Json(#[from] serde_json::Error),

    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` expects a number, found `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },
    #[error("unknown discipline `{0}`")]
    UnknownDiscipline(String),
    #[error("unknown actor `{0}`")]
    UnknownActor(String),
    #[error("unknown team `{0}`")]
    UnknownTeam(String),
    #[error("feature schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("perfect separation detected (coefficient norm {norm:.3e} exceeded threshold)")]
    Separation { norm: f64 },
    #[error("rank-deficient design; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("degenerate variance: all residual products are identical{}", actor_suffix(.actor))]
    DegenerateVariance { actor: Option<String> },
    #[error("training row {row} was never out-of-bag; increase the tree count (currently {trees})")]
    NeverOutOfBag { row: usize, trees: usize },
    #[error("schedule graph is disconnected; ratings are not identified ({components} components)")]
    DisconnectedSchedule { components: usize },
    #[error("match dated {match_date} lies after the reference date {reference}")]
    FutureMatch {
        match_date: chrono::NaiveDate,
        reference: chrono::NaiveDate,
    },
    #[error("no events observed; the cumulative hazard is not estimable")]
    NoEvents,
    #[error("model file format version {found} is not supported (this build reads up to {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("{failed} of {total} replications failed (at most 1% may be excluded)")]
    ReplicationFailures { failed: usize, total: usize },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

fn actor_suffix(actor: &Option<String>) -> String {
    match actor {
        Some(a) => format!(" (actor `{a}`)"),
        None => String::new(),
    }
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::UnknownDiscipline(_) => ErrorKind::Usage,
            Error::Separation { .. }
            | Error::RankDeficient { .. }
            | Error::NonConvergence { .. }
            | Error::DegenerateVariance { .. }
            | Error::NeverOutOfBag { .. }
            | Error::ReplicationFailures { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    /// Attaches an actor id to a degenerate-variance error; other errors pass through.
    pub fn with_actor(self, actor: &str) -> Self {
        match self {
            Error::DegenerateVariance { actor: None } => Error::DegenerateVariance {
                actor: Some(actor.to_string()),
            },
            other => other,
        }
    }
}
