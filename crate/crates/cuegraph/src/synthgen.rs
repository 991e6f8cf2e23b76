//! Synthetic dataset generator: scenario-mixture cue sampling with
//! consistency repair and schematic transcripts. Output is deterministic in
//! (seed, index), so regenerating a manifest is byte-identical and any
//! single segment can be reproduced without generating its predecessors.

use crate::cue::{Cue, CueMap, CueVector};
use crate::dataset::{
    derive_ground_truth, DatasetManifest, LabeledSegment, Provenance, Segment, Speaker, Utterance,
};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SEGMENTS_PER_CLIP: usize = 30;

/// One mixture component: a named situation with per-cue Bernoulli rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub weight: f64,
    pub cue_probs: CueMap<f64>,
}

impl Scenario {
    pub fn new(name: &str, weight: f64, cue_probs: CueMap<f64>) -> Self {
        Scenario {
            name: name.into(),
            weight,
            cue_probs,
        }
    }
}

fn default_frame_rate() -> f64 {
    1.0
}
fn default_segment_duration() -> f64 {
    10.0
}
fn default_emit_transcripts() -> bool {
    true
}
fn default_name() -> String {
    "synthetic".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_segments: usize,
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default = "default_segment_duration")]
    pub segment_duration_s: f64,
    #[serde(default = "default_emit_transcripts")]
    pub emit_transcripts: bool,
    #[serde(default = "default_name")]
    pub name: String,
}

impl GeneratorConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: GeneratorConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::validation("n_segments must be positive"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::validation("at least one scenario is required"));
        }
        if self.name.is_empty() {
            return Err(Error::validation("name must be non-empty"));
        }
        if !(self.frame_rate_hz > 0.0) || !(self.segment_duration_s > 0.0) {
            return Err(Error::validation(
                "frame_rate_hz and segment_duration_s must be positive",
            ));
        }
        let mut total = 0.0;
        for s in &self.scenarios {
            if s.name.is_empty() {
                return Err(Error::validation("scenario names must be non-empty"));
            }
            if !(s.weight > 0.0) || !s.weight.is_finite() {
                return Err(Error::validation(format!(
                    "scenario {:?} needs a positive finite weight",
                    s.name
                )));
            }
            total += s.weight;
            for cue in Cue::ALL {
                let p = *s.cue_probs.get(cue);
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::validation(format!(
                        "scenario {:?} probability for {} is out of [0, 1]",
                        s.name, cue
                    )));
                }
            }
        }
        if !(total > 0.0) {
            return Err(Error::validation("scenario weights must sum to a positive value"));
        }
        Ok(())
    }
}

/// Per-segment RNG: an independent ChaCha8 stream keyed by hashing the
/// config seed with the segment index.
fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((index as u64).to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn pick_scenario<'c>(config: &'c GeneratorConfig, rng: &mut ChaCha8Rng) -> &'c Scenario {
    let total: f64 = config.scenarios.iter().map(|s| s.weight).sum();
    let mut draw = rng.random_range(0.0..total);
    for s in &config.scenarios {
        if draw < s.weight {
            return s;
        }
        draw -= s.weight;
    }
    config.scenarios.last().unwrap()
}

/// Force the cue vector onto the physically coherent subspace: turn-taking
/// and speech directed at the wearer both imply someone else is audibly
/// talking.
pub fn consistency_repair(mut cues: CueVector) -> CueVector {
    if cues.stad || cues.aud {
        cues.osad = true;
    }
    cues
}

fn sample_cues(scenario: &Scenario, rng: &mut ChaCha8Rng) -> CueVector {
    let mut cues = CueVector::default();
    for cue in Cue::ALL {
        let value = rng.random_bool(*scenario.cue_probs.get(cue));
        cues.set(cue, value);
    }
    consistency_repair(cues)
}

/// Lay utterances into equal slots across the segment, each starting a
/// twentieth of a slot in and covering 50..80% of the slot.
fn slot_utterances(
    speakers: &[Speaker],
    duration_s: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Utterance> {
    let slot = duration_s / speakers.len() as f64;
    speakers
        .iter()
        .enumerate()
        .map(|(i, &speaker)| {
            let start_s = i as f64 * slot + 0.05 * slot;
            let end_s = start_s + rng.random_range(0.5..0.8) * slot;
            let text = match speaker {
                Speaker::Wearer => "yeah I think so",
                Speaker::Other(_) => "what do you think about this",
                Speaker::Unknown => "hm",
            };
            Utterance {
                speaker,
                start_s,
                end_s,
                text: text.into(),
                vocalization: false,
            }
        })
        .collect()
}

fn sample_transcript(
    cues: &CueVector,
    duration_s: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Utterance> {
    if cues.stad {
        // Turn-taking: alternate two parties for 2..=4 utterances; the
        // wearer joins only when they are actually talking.
        let n = rng.random_range(2..=4usize);
        let pair = if cues.udsd {
            [Speaker::Wearer, Speaker::Other(1)]
        } else {
            [Speaker::Other(1), Speaker::Other(2)]
        };
        let speakers: Vec<Speaker> = (0..n).map(|i| pair[i % 2]).collect();
        return slot_utterances(&speakers, duration_s, rng);
    }
    let mut speakers = Vec::new();
    if cues.osad {
        speakers.push(Speaker::Other(1));
    }
    if cues.udsd {
        speakers.push(Speaker::Wearer);
    }
    slot_utterances(&speakers, duration_s, rng)
}

/// Generate segment `index` of the dataset `config` describes. Draw order
/// is fixed (scenario, the eight cues, then transcript), so every segment
/// is a pure function of (seed, index).
pub fn generate_segment(config: &GeneratorConfig, index: usize) -> LabeledSegment {
    let mut rng = rng_for(config.seed, index);
    let scenario = pick_scenario(config, &mut rng);
    let cues = sample_cues(scenario, &mut rng);
    let transcript = if config.emit_transcripts {
        Some(sample_transcript(&cues, config.segment_duration_s, &mut rng))
    } else {
        None
    };

    let clip_index = index / SEGMENTS_PER_CLIP;
    let slot_in_clip = index % SEGMENTS_PER_CLIP;
    let segment_id = format!("{}-seg-{:06}", config.name, index);
    let clip_id = format!("{}-clip-{:05}", config.name, clip_index);
    let n_frames =
        crate::dataset::expected_frame_count(config.segment_duration_s, config.frame_rate_hz);
    let frame_times: Vec<f64> = (0..n_frames).map(|k| k as f64 / config.frame_rate_hz).collect();
    let frame_refs: Vec<String> = (0..n_frames)
        .map(|k| format!("synthetic://{}/{}/frame/{}", config.name, segment_id, k))
        .collect();

    LabeledSegment {
        segment: Segment {
            segment_id: segment_id.clone(),
            clip_id,
            start_s: slot_in_clip as f64 * config.segment_duration_s,
            duration_s: config.segment_duration_s,
            frame_times,
            frame_refs,
            audio_ref: Some(format!("synthetic://{}/{}/audio", config.name, segment_id)),
            transcript,
        },
        consensus: cues,
        ground_truth_interaction: derive_ground_truth(&cues),
        provenance: Provenance::Synthetic,
    }
}

pub fn generate(config: &GeneratorConfig) -> Result<DatasetManifest> {
    config.validate()?;
    let segments = (0..config.n_segments)
        .map(|i| generate_segment(config, i))
        .collect();
    let manifest = DatasetManifest {
        name: config.name.clone(),
        frame_rate_hz: config.frame_rate_hz,
        segment_duration_s: config.segment_duration_s,
        segments,
    };
    crate::dataset::check_manifest(&manifest)
        .into_iter()
        .next()
        .map_or(Ok(manifest), |v| {
            Err(Error::Invariant {
                segment_id: v.segment_id.unwrap_or_default(),
                field: v.field,
                message: v.message,
            })
        })
}

/// A three-scenario mixture (conversation, bystander chatter, solo focus)
/// used by examples and tests.
pub fn demo_scenarios() -> Vec<Scenario> {
    let conversation = Scenario::new(
        "conversation",
        0.4,
        CueMap {
            osad: 0.95,
            stad: 0.9,
            aud: 0.85,
            udsd: 0.8,
            pad: 0.9,
            igd: 0.8,
            ogd: 0.75,
            sfd: 0.2,
        },
    );
    let bystanders = Scenario::new(
        "bystanders",
        0.3,
        CueMap {
            osad: 0.9,
            stad: 0.5,
            aud: 0.05,
            udsd: 0.05,
            pad: 0.4,
            igd: 0.1,
            ogd: 0.1,
            sfd: 0.5,
        },
    );
    let solo = Scenario::new(
        "solo",
        0.3,
        CueMap {
            osad: 0.05,
            stad: 0.0,
            aud: 0.0,
            udsd: 0.05,
            pad: 0.05,
            igd: 0.02,
            ogd: 0.02,
            sfd: 0.85,
        },
    );
    vec![conversation, bystanders, solo]
}

pub fn demo_config(n_segments: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_segments,
        scenarios: demo_scenarios(),
        seed,
        frame_rate_hz: default_frame_rate(),
        segment_duration_s: default_segment_duration(),
        emit_transcripts: true,
        name: default_name(),
    }
}
