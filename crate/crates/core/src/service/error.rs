use serde_json::{json, Value};
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::griddef::GridError;
use crate::ingest::IngestError;
use crate::provenance::{RunId, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("data directory unavailable: {0}")]
    DataDirUnavailable(String),
    #[error("data directory is not empty: {0}")]
    DataDirNotEmpty(String),
    #[error("timed out waiting for run {0}")]
    Timeout(RunId),
    #[error("service is shutting down")]
    ShuttingDown,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How a caller should report an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Internal,
}

impl ServiceError {
    pub fn class(&self) -> ErrorClass {
        use ErrorClass::*;
        match self {
            ServiceError::Store(e) => match e {
                StoreError::UnknownProject(_)
                | StoreError::UnknownRun(_)
                | StoreError::UnknownParent(_)
                | StoreError::UnknownEnsemble(_) => NotFound,
                StoreError::ValidationFailed(_) => Validation,
                StoreError::IncompatibleMember { .. }
                | StoreError::RunActive(_)
                | StoreError::InvalidTransition { .. }
                | StoreError::Locked(_) => Conflict,
                StoreError::Io(_) | StoreError::Corrupt { .. } => Internal,
            },
            ServiceError::Ingest(e) => ingest_class(e),
            ServiceError::Analytics(e) => match e {
                AnalyticsError::Ingest(inner) => ingest_class(inner),
                AnalyticsError::EmptyScenario | AnalyticsError::InvalidScenario(_) | AnalyticsError::InvalidQuery(_) => {
                    Validation
                }
                AnalyticsError::MemberNotIngested { .. }
                | AnalyticsError::EmptyEnsemble
                | AnalyticsError::ShapeMismatch
                | AnalyticsError::RunIncomplete(_) => Conflict,
            },
            ServiceError::Grid(_) | ServiceError::Invalid(_) => Validation,
            ServiceError::DataDirNotEmpty(_) => Conflict,
            ServiceError::Timeout(_) | ServiceError::ShuttingDown => Conflict,
            ServiceError::DataDirUnavailable(_) | ServiceError::Io(_) => Internal,
        }
    }

    /// Stable snake_case identifier.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Store(e) => match e {
                StoreError::UnknownProject(_) => "unknown_project",
                StoreError::UnknownRun(_) => "unknown_run",
                StoreError::UnknownParent(_) => "unknown_parent",
                StoreError::UnknownEnsemble(_) => "unknown_ensemble",
                StoreError::ValidationFailed(_) => "validation_failed",
                StoreError::IncompatibleMember { .. } => "incompatible_member",
                StoreError::RunActive(_) => "run_active",
                StoreError::InvalidTransition { .. } => "invalid_transition",
                StoreError::Io(_) => "store_io",
                StoreError::Corrupt { .. } => "store_corrupt",
                StoreError::Locked(_) => "data_dir_locked",
            },
            ServiceError::Ingest(e) => ingest_code(e),
            ServiceError::Analytics(e) => match e {
                AnalyticsError::Ingest(inner) => ingest_code(inner),
                AnalyticsError::MemberNotIngested { .. } => "member_not_ingested",
                AnalyticsError::EmptyEnsemble => "empty_ensemble",
                AnalyticsError::EmptyScenario => "empty_scenario",
                AnalyticsError::InvalidScenario(_) => "invalid_scenario",
                AnalyticsError::ShapeMismatch => "shape_mismatch",
                AnalyticsError::RunIncomplete(_) => "run_incomplete",
                AnalyticsError::InvalidQuery(_) => "invalid_query",
            },
            ServiceError::Grid(e) => match e {
                GridError::TooSmall { .. } => "too_small",
                GridError::MarginViolation => "margin_violation",
                GridError::BrushOutsideParent => "brush_outside_parent",
                _ => "invalid_grid",
            },
            ServiceError::Invalid(_) => "invalid_request",
            ServiceError::DataDirUnavailable(_) => "data_dir_unavailable",
            ServiceError::DataDirNotEmpty(_) => "data_dir_not_empty",
            ServiceError::Timeout(_) => "timeout",
            ServiceError::ShuttingDown => "shutting_down",
            ServiceError::Io(_) => "io",
        }
    }

    /// Machine-readable error body.
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.to_string(), "code": self.code() });
        if let ServiceError::Store(StoreError::ValidationFailed(report)) = self {
            v["report"] = serde_json::to_value(report).unwrap_or(Value::Null);
        }
        v
    }
}

fn ingest_code(e: &IngestError) -> &'static str {
    match e {
        IngestError::UnknownRun(_) => "unknown_run",
        IngestError::UnknownDomain(_) => "unknown_domain",
        IngestError::NothingIngested => "nothing_ingested",
        IngestError::RangeNotIngested { .. } => "range_not_ingested",
        IngestError::InvalidRange { .. } => "invalid_range",
        IngestError::PointOutOfRange { .. } => "point_out_of_range",
        IngestError::Io(_) => "ingest_io",
    }
}

fn ingest_class(e: &IngestError) -> ErrorClass {
    match e {
        IngestError::UnknownRun(_) | IngestError::UnknownDomain(_) => ErrorClass::NotFound,
        IngestError::NothingIngested | IngestError::RangeNotIngested { .. } => ErrorClass::Conflict,
        IngestError::InvalidRange { .. } | IngestError::PointOutOfRange { .. } => ErrorClass::Validation,
        IngestError::Io(_) => ErrorClass::Internal,
    }
}
