//! CLI error type: a machine-parsable category plus a human message.

use tabret::corpus::CorpusError;
use tabret::embed::EmbedError;
use tabret::eval::EvalError;
use tabret::index::IndexError;
use tabret::provider::ProviderError;
use tabret::qgen::QgenError;
use tabret::table::TableError;

#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    /// The single stderr line a wrapper script can parse.
    pub fn to_line(&self) -> String {
        format!(
            "error category={} message={:?}",
            self.category, self.message
        )
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("io", e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let category = match &e {
            CorpusError::Parse { .. } => "parse",
            CorpusError::DuplicateId { .. } | CorpusError::DanglingGold { .. } => "corpus",
            CorpusError::Io(_) => "io",
        };
        Self::new(category, e.to_string())
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        Self::new("table", e.to_string())
    }
}

impl From<QgenError> for CliError {
    fn from(e: QgenError) -> Self {
        let category = match &e {
            QgenError::Provider(_) => "provider",
            _ => "qgen",
        };
        Self::new(category, e.to_string())
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        Self::new("provider", e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        Self::new("embed", e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        Self::new("index", e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::new("eval", e.to_string())
    }
}
