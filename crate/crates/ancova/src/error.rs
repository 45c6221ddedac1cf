use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: missing required column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("{}: row {row}, column `{column}`: {reason}", path.display())]
    Cell {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("{}: at `{field}`: {reason}", path.display())]
    Schema {
        path: PathBuf,
        field: String,
        reason: String,
    },

    #[error("unknown scenario `{name}`; available scenarios: {available}")]
    UnknownScenario { name: String, available: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ancova_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 3 for numerical failures, 2 for everything the
    /// user can fix in the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
