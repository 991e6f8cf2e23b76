//! Egocentric social-interaction detection from wearable-camera segments.
//!
//! The pipeline answers eight yes/no cue questions about a ten-second
//! segment (who is talking, who is looking at whom, personal space, task
//! focus), combines them through a fixed belief graph into an "interacting"
//! verdict plus an "ok to interrupt" flag, and scores runs against labeled
//! data. Cue answers come from pluggable backends: label oracles, seeded
//! noisy oracles for calibration studies, or a remote multimodal model
//! reached over HTTP with on-disk response caching.
//!
//! Module map:
//! - [`cue`]: the eight cues and dense per-cue containers.
//! - [`dataset`]: segment records, manifest I/O, annotation merging, stats.
//! - [`graph`]: belief combination, gate policies, evaluation traces.
//! - [`detectors`]: prompt construction, answer parsing, query backends.
//! - [`metrics`]: confusion matrices, timing/detection scores, run
//!   comparison tables.
//! - [`synthgen`]: deterministic synthetic dataset generation.
//! - [`harness`]: experiment configs, the resumable runner, sweeps, and
//!   report auditing.

pub mod cue;
pub mod dataset;
pub mod detectors;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod synthgen;

pub use cue::{Cue, CueMap, CueVector};
pub use dataset::{DatasetManifest, LabeledSegment, Segment, Speaker, Utterance};
pub use detectors::{BackendSpec, Detector, ModalityConfig, Mode, PromptVariant};
pub use error::{Error, Result};
pub use graph::{evaluate, Decision, GatePolicy};
pub use harness::{run, ComponentMask, ExperimentConfig};
pub use metrics::MetricsReport;
