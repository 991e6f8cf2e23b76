//! Data model for egocentric segments: manifest ingestion, clip
//! segmentation, annotation aggregation, and dataset statistics.
//!
//! The on-disk interchange format is JSON Lines: an optional header object
//! (`{name, frame_rate_hz, segment_duration_s}`) followed by one labeled
//! segment per line. Media references (`frame_refs`, `audio_ref`) are opaque
//! strings; this crate never decodes video or audio.

mod annotate;
mod manifest;
mod stats;

pub use annotate::{label_segments, majority_vote, DiscardedSegment, VoteOutcome};
pub use manifest::{
    check_manifest, load_manifest, manifest_from_str, manifest_to_string, parse_labeled_line,
    save_manifest,
};
pub use stats::{
    cue_correlation_matrix, distribution_report, CorrelationMatrix, CueCount, DistributionReport,
};

use crate::cue::CueVector;
use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// Who produced an utterance, from the wearer's perspective.
/// Serialized as `"WEARER"`, `"OTHER:<n>"`, or `"UNKNOWN"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Speaker {
    Wearer,
    Other(u32),
    Unknown,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::Wearer => f.write_str("WEARER"),
            Speaker::Other(n) => write!(f, "OTHER:{n}"),
            Speaker::Unknown => f.write_str("UNKNOWN"),
        }
    }
}

impl FromStr for Speaker {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "WEARER" => Ok(Speaker::Wearer),
            "UNKNOWN" => Ok(Speaker::Unknown),
            _ => match s.strip_prefix("OTHER:") {
                Some(n) => n
                    .parse::<u32>()
                    .map(Speaker::Other)
                    .map_err(|_| Error::validation(format!("bad speaker tag {s:?}"))),
                None => Err(Error::validation(format!(
                    "bad speaker tag {s:?} (expected WEARER, OTHER:<n>, or UNKNOWN)"
                ))),
            },
        }
    }
}

impl Serialize for Speaker {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Speaker {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// One transcript entry within a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    /// Seconds from segment start.
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
    /// Marks non-verbal vocalizations; only such entries may have empty text.
    #[serde(default, skip_serializing_if = "is_false")]
    pub vocalization: bool,
}

/// A single analysis window cut from a source clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: String,
    pub clip_id: String,
    /// Seconds from clip start.
    pub start_s: f64,
    pub duration_s: f64,
    /// Seconds from segment start, strictly increasing, in `[0, duration_s)`.
    pub frame_times: Vec<f64>,
    /// Opaque media references, one per frame time.
    pub frame_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<Utterance>>,
}

/// Annotator confidence on one cue answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Confidence {
    Low,
    High,
}

/// One annotator's full pass over one segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub segment_id: String,
    pub annotator_id: String,
    pub cues: CueVector,
    pub confidence: crate::cue::CueMap<Confidence>,
}

/// Where a labeled segment's cue values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Consensus,
    Synthetic,
    Imported,
}

/// A segment together with its consensus cue labels and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    #[serde(flatten)]
    pub segment: Segment,
    #[serde(rename = "cues")]
    pub consensus: CueVector,
    #[serde(rename = "ground_truth")]
    pub ground_truth_interaction: bool,
    pub provenance: Provenance,
}

/// An ordered collection of labeled segments plus sampling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub frame_rate_hz: f64,
    pub segment_duration_s: f64,
    pub segments: Vec<LabeledSegment>,
}

/// Questions asked per segment: the eight cues plus the final
/// interaction question.
pub const QUESTIONS_PER_SEGMENT: u64 = 9;

impl DatasetManifest {
    /// Total video-question pairs represented by this manifest.
    pub fn pair_count(&self) -> u64 {
        self.segments.len() as u64 * QUESTIONS_PER_SEGMENT
    }
}

/// A single invariant violation found while checking a manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// `None` for manifest-level problems (e.g. a bad header).
    pub segment_id: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.segment_id {
            Some(id) => write!(f, "segment {id}: {}: {}", self.field, self.message),
            None => write!(f, "manifest: {}: {}", self.field, self.message),
        }
    }
}

/// Interaction is present iff someone addresses the wearer or the wearer
/// speaks to someone.
pub fn derive_ground_truth(cues: &CueVector) -> bool {
    cues.aud || cues.udsd
}

/// Expected number of frames for a window: one at every multiple of
/// `1/rate` inside `[0, duration)`.
pub fn expected_frame_count(duration_s: f64, frame_rate_hz: f64) -> usize {
    (duration_s * frame_rate_hz - 1e-9).ceil().max(0.0) as usize
}

/// Cut a clip into consecutive non-overlapping windows of `window_s`
/// seconds, sampled at `frame_rate_hz`. A trailing remainder shorter than
/// the window is dropped. Frame and audio references are deterministic
/// placeholders for callers to rewrite.
pub fn segmentize_clip(
    clip_id: &str,
    clip_duration_s: f64,
    window_s: f64,
    frame_rate_hz: f64,
) -> Result<Vec<Segment>> {
    if !(clip_duration_s > 0.0) {
        return Err(Error::validation("clip_duration_s must be positive"));
    }
    if !(window_s > 0.0) {
        return Err(Error::validation("window_s must be positive"));
    }
    if !(frame_rate_hz > 0.0) {
        return Err(Error::validation("frame_rate_hz must be positive"));
    }
    let n = (clip_duration_s / window_s).floor() as usize;
    let frames = expected_frame_count(window_s, frame_rate_hz);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let frame_times: Vec<f64> = (0..frames).map(|k| k as f64 / frame_rate_hz).collect();
        let frame_refs = (0..frames)
            .map(|k| format!("frame://{clip_id}/{i}/{k}"))
            .collect();
        out.push(Segment {
            segment_id: format!("{clip_id}:{i:05}"),
            clip_id: clip_id.to_string(),
            start_s: i as f64 * window_s,
            duration_s: window_s,
            frame_times,
            frame_refs,
            audio_ref: Some(format!("audio://{clip_id}/{i}")),
            transcript: None,
        });
    }
    Ok(out)
}
