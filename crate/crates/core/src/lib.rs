//! Compile recorded interaction trajectories into environment maps.
//!
//! An environment map bundles four things learned from recordings of a
//! software environment: contexts (URL-pattern-identified pages), the
//! parameterized actions available on each context, the workflows observed
//! in the recordings, and tacit knowledge (definitions and procedures).
//!
//! The crate is organized as the construction pipeline reads:
//!
//! - [`trace`]: the canonical trajectory event-log format and the
//!   accessibility-tree filter.
//! - [`annotator`]: the semantic-judgment contract, with an offline
//!   heuristic provider and an optional HTTP provider.
//! - [`map`]: environment-map types, stable IDs, on-disk layout, validation.
//! - [`pipeline`]: the five construction phases plus merging.
//! - [`query`], [`nav_metrics`], [`viz`]: consumers of built maps and HAR logs.

pub mod annotator;
pub mod ids;
pub mod map;
pub mod nav_metrics;
pub mod pipeline;
pub mod query;
pub mod trace;
pub mod viz;

pub use annotator::{Annotator, HeuristicAnnotator};
pub use map::EnvironmentMap;
pub use pipeline::{merge_maps, Normalizer, Pipeline};
pub use trace::{parse_trajectory, Trajectory};

/// Version string recorded in map metadata.
pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");
