//! Core library for image-based dietary food records.
//!
//! The crate holds everything that does not need a network: the occasion
//! data model and its lifecycle, the pre-loaded food list with search, the
//! pluggable analysis boundary with its deterministic stubs, energy-error
//! metrics, and the persistence layer (blob store, record store, audit
//! trail). The HTTP service and the participant CLI are built on top of it.

pub mod analysis;
pub mod api;
pub mod canonical;
pub mod food;
pub mod model;
pub mod store;

pub use analysis::{
    analyze, classify_estimate, estimate_portion, mean_error_rate, refine, write_metrics_csv,
    AnalysisError, AnalysisInput, Analyzer, AnalyzerKind, AnalyzerRef, EstimateClass,
    EvaluationRecord, GridStub, MetricError, Refinement, SidecarStub, METRICS_CSV_HEADER,
};
pub use food::{FoodCode, FoodDatabase, FoodItem, FoodListError, Resolution, ResolveError};
pub use model::*;
pub use store::{
    replay, AuditAction, AuditActor, AuditEntry, AuditEvent, BlobRef, BlobStore, OccasionSummary,
    RecordStore, ReplayError, StoreError,
};
