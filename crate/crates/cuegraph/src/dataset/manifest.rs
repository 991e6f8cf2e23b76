//! JSON Lines manifest reading, writing, and invariant checking.

use super::{
    derive_ground_truth, expected_frame_count, DatasetManifest, LabeledSegment, Violation,
};
use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::HashSet;
use std::fs;
use std::path::Path;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(default)]
    name: String,
    #[serde(default = "default_rate")]
    frame_rate_hz: f64,
    #[serde(default = "default_duration")]
    segment_duration_s: f64,
}

fn default_rate() -> f64 {
    1.0
}

fn default_duration() -> f64 {
    10.0
}

impl Default for Header {
    fn default() -> Self {
        Header {
            name: String::new(),
            frame_rate_hz: default_rate(),
            segment_duration_s: default_duration(),
        }
    }
}

/// Parse one segment line of a manifest.
pub fn parse_labeled_line(line: &str) -> Result<LabeledSegment> {
    Ok(serde_json::from_str(line)?)
}

fn is_header_line(line: &str) -> bool {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::Object(map)) => !map.contains_key("segment_id"),
        _ => false,
    }
}

/// Parse a manifest from text. `origin` labels parse errors (usually the
/// file path). Runs the full invariant check and fails on the first
/// violation; use [`check_manifest`] to collect all of them.
pub fn manifest_from_str(text: &str, origin: &str) -> Result<DatasetManifest> {
    let mut header = Header::default();
    let mut segments = Vec::new();
    let mut saw_record = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !saw_record && is_header_line(line) {
            header = serde_json::from_str(line).map_err(|e| Error::ManifestParse {
                path: origin.to_string(),
                line: lineno,
                message: e.to_string(),
            })?;
            saw_record = true;
            continue;
        }
        saw_record = true;
        let seg = parse_labeled_line(line).map_err(|e| Error::ManifestParse {
            path: origin.to_string(),
            line: lineno,
            message: e.to_string(),
        })?;
        segments.push(seg);
    }
    let manifest = DatasetManifest {
        name: header.name,
        frame_rate_hz: header.frame_rate_hz,
        segment_duration_s: header.segment_duration_s,
        segments,
    };
    if let Some(v) = check_manifest(&manifest).into_iter().next() {
        return Err(Error::Invariant {
            segment_id: v.segment_id.unwrap_or_else(|| "<manifest>".into()),
            field: v.field,
            message: v.message,
        });
    }
    Ok(manifest)
}

/// Load and fully validate a manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    manifest_from_str(&text, &path.display().to_string())
}

/// Render a manifest as JSON Lines (header line first).
pub fn manifest_to_string(manifest: &DatasetManifest) -> String {
    let header = serde_json::json!({
        "name": manifest.name,
        "frame_rate_hz": manifest.frame_rate_hz,
        "segment_duration_s": manifest.segment_duration_s,
    });
    let mut out = serde_json::to_string(&header).unwrap();
    out.push('\n');
    for seg in &manifest.segments {
        out.push_str(&serde_json::to_string(seg).unwrap());
        out.push('\n');
    }
    out
}

/// Write a manifest file.
pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest_to_string(manifest)).map_err(|e| Error::io(path, e))
}

/// Check every manifest and segment invariant, collecting all violations.
pub fn check_manifest(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let top = |field: &str, message: String| Violation {
        segment_id: None,
        field: field.to_string(),
        message,
    };
    if !(manifest.frame_rate_hz > 0.0) {
        out.push(top("frame_rate_hz", "must be positive".into()));
    }
    if !(manifest.segment_duration_s > 0.0) {
        out.push(top("segment_duration_s", "must be positive".into()));
    }

    let mut seen: HashSet<&str> = HashSet::new();
    for seg in &manifest.segments {
        if !seen.insert(seg.segment.segment_id.as_str()) {
            out.push(Violation {
                segment_id: Some(seg.segment.segment_id.clone()),
                field: "segment_id".into(),
                message: "duplicate segment_id".into(),
            });
        }
        out.extend(check_labeled_segment(seg, manifest.frame_rate_hz));
    }
    out
}

fn check_labeled_segment(seg: &LabeledSegment, frame_rate_hz: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let id = &seg.segment.segment_id;
    let mut push = |field: &str, message: String| {
        out.push(Violation {
            segment_id: Some(id.clone()),
            field: field.to_string(),
            message,
        });
    };
    let s = &seg.segment;

    if !(s.duration_s > 0.0) {
        push("duration_s", "must be positive".into());
    }
    if s.start_s < 0.0 {
        push("start_s", "must be non-negative".into());
    }

    for w in s.frame_times.windows(2) {
        if w[1] <= w[0] {
            push(
                "frame_times",
                format!("not strictly increasing at {} -> {}", w[0], w[1]),
            );
            break;
        }
    }
    if let Some(t) = s
        .frame_times
        .iter()
        .find(|t| **t < 0.0 || **t >= s.duration_s)
    {
        push("frame_times", format!("time {t} outside [0, {})", s.duration_s));
    }
    if s.frame_refs.len() != s.frame_times.len() {
        push(
            "frame_refs",
            format!(
                "{} refs for {} frame times",
                s.frame_refs.len(),
                s.frame_times.len()
            ),
        );
    }
    if frame_rate_hz > 0.0 && s.duration_s > 0.0 {
        let expected = expected_frame_count(s.duration_s, frame_rate_hz);
        if s.frame_times.len() != expected {
            push(
                "frame_times",
                format!(
                    "expected {expected} frames at {frame_rate_hz} Hz over {} s, found {}",
                    s.duration_s,
                    s.frame_times.len()
                ),
            );
        }
    }

    if let Some(transcript) = &s.transcript {
        let mut prev_start = f64::NEG_INFINITY;
        for (i, u) in transcript.iter().enumerate() {
            let field = format!("transcript[{i}]");
            if u.start_s < prev_start {
                push(&field, "utterances not ordered by start_s".into());
            }
            prev_start = u.start_s;
            if !(u.start_s < u.end_s) {
                push(&field, format!("start_s {} not before end_s {}", u.start_s, u.end_s));
            }
            if u.start_s < 0.0 || u.end_s > s.duration_s {
                push(&field, format!("[{}, {}] outside segment [0, {}]", u.start_s, u.end_s, s.duration_s));
            }
            if u.text.is_empty() && !u.vocalization {
                push(&field, "empty text without vocalization flag".into());
            }
        }
    }

    if seg.ground_truth_interaction != derive_ground_truth(&seg.consensus) {
        push(
            "ground_truth",
            format!(
                "stated {} but cues imply {}",
                seg.ground_truth_interaction,
                derive_ground_truth(&seg.consensus)
            ),
        );
    }
    out
}
