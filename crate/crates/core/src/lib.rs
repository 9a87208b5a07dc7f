//! Information-theoretic scene graphs from hand/object pose trajectories.
//!
//! The pipeline runs demonstration → windowed entropy and mutual information →
//! hand–object and object–object interaction states → per-frame scene graphs →
//! subtask segments → a template behavior tree, with evaluation metrics and a
//! seeded synthetic demonstration generator alongside.

pub mod config;
pub mod demo;
pub mod error;
pub mod handselect;
pub mod infotheory;
pub mod interaction;
pub mod metrics;
pub mod planner;
pub mod scenegraph;
pub mod segmentation;
pub mod signals;
pub mod synthgen;

pub use config::AnalysisConfig;
pub use demo::{Axis, Demonstration, EntityKind, EntityTrack, PoseSample};
pub use error::{Error, Result};
