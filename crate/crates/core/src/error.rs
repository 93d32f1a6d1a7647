use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required column is absent from a delimited file header.
    #[error("schema error: column `{0}` not found in header")]
    MissingColumn(String),

    /// A single record could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Structural problem in a text file format (embedding, matrix, export).
    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code for this error: 2 config, 4 numerical, 3 everything
    /// else that stems from the data or the file system.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numerical(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Rebuilds an owned copy for errors that must be reported more than once
    /// (cached stage results). I/O and parser errors collapse to `Data`.
    pub(crate) fn replay(&self) -> Error {
        match self {
            Error::MissingColumn(c) => Error::MissingColumn(c.clone()),
            Error::Parse { line, message } => Error::Parse {
                line: *line,
                message: message.clone(),
            },
            Error::Format { line, message } => Error::Format {
                line: *line,
                message: message.clone(),
            },
            Error::Config(m) => Error::Config(m.clone()),
            Error::Data(m) => Error::Data(m.clone()),
            Error::Dimension { expected, found } => Error::Dimension {
                expected: *expected,
                found: *found,
            },
            Error::Numerical(m) => Error::Numerical(m.clone()),
            Error::Stage { stage, source } => Error::Stage {
                stage,
                source: Box::new(source.replay()),
            },
            other => Error::Data(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Data("x".into()).exit_code(), 3);
        assert_eq!(Error::Numerical("x".into()).exit_code(), 4);
        let staged = Error::Numerical("nan".into()).in_stage("translate");
        assert_eq!(staged.exit_code(), 4);
        assert!(staged.to_string().contains("translate"));
    }
}
