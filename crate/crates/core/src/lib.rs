//! Orchestration, provenance, caching, ingestion and ensemble analytics for
//! nested-grid weather runs driven by a deterministic surrogate model.

pub mod analytics;
pub mod artifact;
pub mod canonical;
pub mod config;
pub mod demo;
pub mod events;
pub mod export;
pub mod griddef;
pub mod ingest;
pub mod provenance;
pub mod scalar;
pub mod service;
pub mod stats;
pub mod toymodel;
pub mod workflow;

pub use config::RunConfig;
pub use griddef::{DomainSpec, GeoRect};
pub use provenance::{EnsembleId, ProjectId, RunId, RunStatus};
pub use scalar::{Grid, Scalar};
pub use service::{Service, ServiceConfig, ServiceError};
pub use toymodel::{Field, IcbcSource, PhysicsSelection};

/// Grid of stored frame values.
pub type FrameGrid = Grid<f32>;
/// Grid of derived quantities (accumulations, probabilities).
pub type FieldGrid = Grid<f64>;
