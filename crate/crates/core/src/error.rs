use std::io;

use thiserror::Error;

use crate::index::DocumentId;
use crate::scoring::MetricId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document with external id {0:?} was already added")]
    DuplicateExternalId(String),

    #[error("unknown document {0}")]
    UnknownDocument(DocumentId),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("query contains no searchable terms after analysis")]
    EmptyQuery,

    #[error("weighted metric {0} has no value")]
    MissingMetric(MetricId),

    #[error("relevant document set is empty")]
    EmptyRelevantSet,

    #[error("query {0:?} has no relevance judgments")]
    MissingJudgment(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("dataset contains no paragraphs")]
    EmptyDataset,

    #[error("index format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable code, used in service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateExternalId(_) => "duplicate_external_id",
            Error::UnknownDocument(_) => "unknown_document",
            Error::Domain(_) => "domain_error",
            Error::InvalidParams(_) => "invalid_params",
            Error::EmptyQuery => "empty_query",
            Error::MissingMetric(_) => "missing_metric",
            Error::EmptyRelevantSet => "empty_relevant_set",
            Error::MissingJudgment(_) => "missing_judgment",
            Error::Parse { .. } => "parse_error",
            Error::EmptyDataset => "empty_dataset",
            Error::Format(_) => "format_error",
            Error::Io(_) => "io_error",
        }
    }
}
