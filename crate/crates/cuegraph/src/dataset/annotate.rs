//! Aggregation of independent annotator passes into consensus labels.

use super::{derive_ground_truth, AnnotationRecord, Confidence, LabeledSegment, Provenance, Segment};
use crate::cue::{Cue, CueMap, CueVector};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Per-cue result of majority voting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoteOutcome {
    Value(bool),
    /// No value reached two confident, agreeing votes.
    Discard,
}

/// Majority vote over one segment's annotation records.
///
/// For each cue independently, a value wins iff at least two annotators
/// voted for it with HIGH confidence and strictly more HIGH votes back it
/// than the opposing value. Anything else is a discard for that cue.
/// The result is permutation-invariant in the input records.
pub fn majority_vote(records: &[AnnotationRecord]) -> Result<CueMap<VoteOutcome>> {
    let first = records
        .first()
        .ok_or_else(|| Error::validation("majority_vote needs at least one record"))?;
    for r in records {
        if r.segment_id != first.segment_id {
            return Err(Error::validation(format!(
                "mixed segment ids in vote: {:?} vs {:?}",
                first.segment_id, r.segment_id
            )));
        }
    }
    Ok(CueMap::from_fn(|cue| {
        let mut high_true = 0u32;
        let mut high_false = 0u32;
        for r in records {
            if *r.confidence.get(cue) == Confidence::High {
                if *r.cues.get(cue) {
                    high_true += 1;
                } else {
                    high_false += 1;
                }
            }
        }
        if high_true >= 2 && high_true > high_false {
            VoteOutcome::Value(true)
        } else if high_false >= 2 && high_false > high_true {
            VoteOutcome::Value(false)
        } else {
            VoteOutcome::Discard
        }
    }))
}

/// A segment excluded from the labeled set because some cue failed consensus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscardedSegment {
    pub segment_id: String,
    pub cues: Vec<Cue>,
}

/// Turn raw segments plus annotation records into labeled segments.
/// Segments where any cue fails consensus are discarded whole and reported,
/// since the decision graph needs a complete cue vector.
pub fn label_segments(
    segments: Vec<Segment>,
    annotations: &[AnnotationRecord],
) -> Result<(Vec<LabeledSegment>, Vec<DiscardedSegment>)> {
    let mut by_segment: HashMap<&str, Vec<&AnnotationRecord>> = HashMap::new();
    for a in annotations {
        by_segment.entry(a.segment_id.as_str()).or_default().push(a);
    }

    let mut labeled = Vec::new();
    let mut discarded = Vec::new();
    for segment in segments {
        let records: Vec<AnnotationRecord> = by_segment
            .get(segment.segment_id.as_str())
            .map(|rs| rs.iter().map(|r| (*r).clone()).collect())
            .unwrap_or_default();
        if records.is_empty() {
            return Err(Error::validation(format!(
                "segment {:?} has no annotation records",
                segment.segment_id
            )));
        }
        let votes = majority_vote(&records)?;
        let losers: Vec<Cue> = Cue::ALL
            .iter()
            .copied()
            .filter(|c| *votes.get(*c) == VoteOutcome::Discard)
            .collect();
        if losers.is_empty() {
            let consensus = CueVector::from_fn(|c| match votes.get(c) {
                VoteOutcome::Value(v) => *v,
                VoteOutcome::Discard => unreachable!(),
            });
            labeled.push(LabeledSegment {
                ground_truth_interaction: derive_ground_truth(&consensus),
                segment,
                consensus,
                provenance: Provenance::Consensus,
            });
        } else {
            discarded.push(DiscardedSegment {
                segment_id: segment.segment_id,
                cues: losers,
            });
        }
    }
    Ok((labeled, discarded))
}
