//! Spatiotemporal k-means (STKM): two-phase moving-cluster analysis.
//!
//! Phase 1 ([`solver`]) fits dynamic cluster center paths and per-time-step
//! soft memberships by alternating minimization of a clustering objective
//! that is unified over space and time. Phase 2 ([`phase2`]) turns the
//! resulting assignment histories into a single static partition of the
//! points. [`metrics`] scores either output against ground truth with
//! adjusted mutual information, [`datagen`] builds synthetic moving-cluster
//! scenarios with exact ground truth, and [`io`] handles file formats and
//! the end-to-end pipeline.

pub mod datagen;
pub mod error;
pub mod io;
pub mod metrics;
pub mod phase2;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate, AssignmentHistory, CenterTensor, Distance, Partition, RawRecord, SolverConfig,
    TrajectoryTensor, WeightTensor, UNASSIGNED,
};
