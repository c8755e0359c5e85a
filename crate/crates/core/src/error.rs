use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A corpus record could not be decoded. `index` is the 0-based record
    /// position (header excluded), `line` the 1-based file line when known.
    #[error("record {index}{}: field `{field}`: {message}", line_suffix(*.line))]
    Record {
        index: usize,
        line: Option<usize>,
        field: String,
        message: String,
    },

    #[error("record {index} (id {id}): hierarchy violation: {}", join(.violations))]
    Hierarchy {
        index: usize,
        id: u64,
        violations: Vec<String>,
    },

    #[error("invalid samples (ids {ids:?}): hierarchy violations")]
    InvalidSamples { ids: Vec<u64> },

    /// A line-oriented resource (lexicon, pinyin or glyph table, config,
    /// ratings) has a bad row.
    #[error("{source_name} line {line}: {message}")]
    Resource {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn resource(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Resource {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" (line {l})"),
        None => String::new(),
    }
}

fn join(v: &[String]) -> String {
    v.join("; ")
}
