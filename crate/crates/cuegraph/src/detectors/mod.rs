//! Cue detection backends. A backend answers yes/no questions about a
//! segment: the eight cue questions, the final interaction question, or
//! the bare baseline question. Four kinds exist: ORACLE (labels passed
//! through), NOISY (labels with calibrated flips), REMOTE (a multimodal
//! model behind an HTTP endpoint, cached), and REPLAY (cache only).

mod parse;
mod prompt;
mod remote;

pub use parse::parse_answer;
pub use prompt::{
    build_prompt, cache_key, format_transcript, sample_frame_indices, MediaItem, MediaKind, Mode,
    ModalityConfig, Prompt, PromptBase, PromptVariant, QueryTarget, FINAL_QUESTION,
};

use crate::cue::{Cue, CueMap};
use crate::dataset::LabeledSegment;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

/// Per-cue answers from one backend over one segment. Absent values mean
/// the cue was never queried.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuePredictions {
    pub segment_id: String,
    pub values: CueMap<Option<bool>>,
    pub confidence: CueMap<Option<f64>>,
    pub backend_id: String,
    pub raw_responses: CueMap<Option<String>>,
    pub parse_failures: CueMap<bool>,
}

impl CuePredictions {
    pub fn new(segment_id: &str, backend_id: &str) -> Self {
        CuePredictions {
            segment_id: segment_id.into(),
            values: CueMap::default(),
            confidence: CueMap::default(),
            backend_id: backend_id.into(),
            raw_responses: CueMap::default(),
            parse_failures: CueMap::default(),
        }
    }

    pub fn parse_failure_count(&self) -> u32 {
        Cue::ALL
            .iter()
            .filter(|&&c| *self.parse_failures.get(c))
            .count() as u32
    }

    /// Check the structural rule that confidence implies a value.
    pub fn validate(&self) -> Result<()> {
        for cue in Cue::ALL {
            if self.confidence.get(cue).is_some() && self.values.get(cue).is_none() {
                return Err(Error::validation(format!(
                    "{} of {} has a confidence but no value",
                    cue, self.segment_id
                )));
            }
        }
        Ok(())
    }
}

/// Answer to the final interaction question.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalPrediction {
    pub value: bool,
    pub raw_response: Option<String>,
    pub parse_failed: bool,
}

/// One resolved query: the effective answer plus bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryOutcome {
    pub value: bool,
    pub confidence: Option<f64>,
    pub raw_response: Option<String>,
    pub parse_failed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Noisy,
    Remote,
    Replay,
}

/// Per-cue rates, writable in config either as one uniform number or as a
/// full per-cue map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rates {
    Uniform(f64),
    PerCue(CueMap<f64>),
}

impl Rates {
    pub fn per_cue(&self) -> CueMap<f64> {
        match *self {
            Rates::Uniform(r) => CueMap::from_fn(|_| r),
            Rates::PerCue(map) => map,
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        for cue in Cue::ALL {
            let r = *self.per_cue().get(cue);
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::validation(format!(
                    "{what} for {cue} is {r}, outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

fn default_final_rate() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisySpec {
    /// Per-cue probability of reporting true when the label is true.
    pub tpr: Rates,
    /// Per-cue probability of reporting false when the label is false.
    pub tnr: Rates,
    pub seed: u64,
    #[serde(default = "default_final_rate")]
    pub final_tpr: f64,
    #[serde(default = "default_final_rate")]
    pub final_tnr: f64,
}

impl NoisySpec {
    pub fn noiseless(seed: u64) -> Self {
        NoisySpec {
            tpr: Rates::Uniform(1.0),
            tnr: Rates::Uniform(1.0),
            seed,
            final_tpr: 1.0,
            final_tnr: 1.0,
        }
    }

    pub fn uniform(tpr: f64, tnr: f64, seed: u64) -> Self {
        NoisySpec {
            tpr: Rates::Uniform(tpr),
            tnr: Rates::Uniform(tnr),
            seed,
            final_tpr: 1.0,
            final_tnr: 1.0,
        }
    }
}

fn default_timeout() -> f64 {
    30.0
}
fn default_max_retries() -> u32 {
    3
}
fn default_max_concurrent() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteSpec {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent_requests: usize,
    pub cache_dir: PathBuf,
    /// Name of the environment variable holding the API key. The key
    /// itself never appears in config files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy: Option<NoisySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<RemoteSpec>,
}

impl BackendSpec {
    pub fn oracle() -> Self {
        BackendSpec {
            kind: BackendKind::Oracle,
            noisy: None,
            remote: None,
        }
    }

    pub fn noisy(spec: NoisySpec) -> Self {
        BackendSpec {
            kind: BackendKind::Noisy,
            noisy: Some(spec),
            remote: None,
        }
    }

    pub fn remote(spec: RemoteSpec) -> Self {
        BackendSpec {
            kind: BackendKind::Remote,
            noisy: None,
            remote: Some(spec),
        }
    }

    pub fn replay(spec: RemoteSpec) -> Self {
        BackendSpec {
            kind: BackendKind::Replay,
            noisy: None,
            remote: Some(spec),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_noisy = self.kind == BackendKind::Noisy;
        let needs_remote = matches!(self.kind, BackendKind::Remote | BackendKind::Replay);
        if self.noisy.is_some() != needs_noisy {
            return Err(Error::validation(format!(
                "backend kind {:?} and the noisy block disagree (the block must be present exactly for kind noisy)",
                self.kind
            )));
        }
        if self.remote.is_some() != needs_remote {
            return Err(Error::validation(format!(
                "backend kind {:?} and the remote block disagree (the block must be present exactly for kind remote/replay)",
                self.kind
            )));
        }
        if let Some(noisy) = &self.noisy {
            noisy.tpr.validate("tpr")?;
            noisy.tnr.validate("tnr")?;
            for (what, r) in [("final_tpr", noisy.final_tpr), ("final_tnr", noisy.final_tnr)] {
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::validation(format!("{what} is {r}, outside [0, 1]")));
                }
            }
        }
        if let Some(remote) = &self.remote {
            if remote.endpoint.is_empty() || remote.model.is_empty() {
                return Err(Error::validation("remote endpoint and model must be non-empty"));
            }
            if !(remote.timeout_s > 0.0) {
                return Err(Error::validation("remote timeout_s must be positive"));
            }
        }
        Ok(())
    }
}

/// Uniform draw in [0, 1) that depends only on (seed, segment_id, label),
/// so noisy answers are stable across runs, ordering, and threads.
fn noise_draw(seed: u64, segment_id: &str, label: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((segment_id.len() as u64).to_le_bytes());
    hasher.update(segment_id.as_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let x = u64::from_le_bytes(digest[..8].try_into().unwrap());
    x as f64 / 2f64.powi(64)
}

fn noisy_answer(truth: bool, tpr: f64, tnr: f64, draw: f64) -> bool {
    if truth {
        draw < tpr
    } else {
        draw >= tnr
    }
}

/// A configured backend ready to answer queries. Cheap to share across
/// threads; all methods take `&self`.
pub struct Detector {
    spec: BackendSpec,
    agent: Option<remote::RemoteAgent>,
}

impl Detector {
    pub fn new(spec: &BackendSpec) -> Result<Detector> {
        spec.validate()?;
        let agent = match spec.kind {
            BackendKind::Remote => Some(remote::RemoteAgent::new(
                spec.remote.as_ref().unwrap(),
                false,
            )?),
            BackendKind::Replay => Some(remote::RemoteAgent::new(
                spec.remote.as_ref().unwrap(),
                true,
            )?),
            _ => None,
        };
        Ok(Detector {
            spec: spec.clone(),
            agent,
        })
    }

    pub fn kind(&self) -> BackendKind {
        self.spec.kind
    }

    /// Human-readable backend identity recorded in predictions and reports.
    pub fn backend_id(&self) -> String {
        match self.spec.kind {
            BackendKind::Oracle => "oracle".into(),
            BackendKind::Noisy => {
                format!("noisy(seed={})", self.spec.noisy.as_ref().unwrap().seed)
            }
            BackendKind::Remote => format!("remote({})", self.agent.as_ref().unwrap().model()),
            BackendKind::Replay => format!("replay({})", self.agent.as_ref().unwrap().model()),
        }
    }

    /// True when answers come from labels rather than a model.
    pub fn is_label_driven(&self) -> bool {
        matches!(self.spec.kind, BackendKind::Oracle | BackendKind::Noisy)
    }

    fn truth_for(&self, segment: &LabeledSegment, target: QueryTarget) -> bool {
        match target {
            QueryTarget::Cue(cue) => *segment.consensus.get(cue),
            QueryTarget::Final | QueryTarget::Direct => segment.ground_truth_interaction,
        }
    }

    /// Answer one question about one segment.
    pub fn query(
        &self,
        segment: &LabeledSegment,
        target: QueryTarget,
        modality: &ModalityConfig,
        variant: &PromptVariant,
        prior: Option<&CuePredictions>,
    ) -> Result<QueryOutcome> {
        match self.spec.kind {
            BackendKind::Oracle => Ok(QueryOutcome {
                value: self.truth_for(segment, target),
                confidence: Some(1.0),
                raw_response: None,
                parse_failed: false,
            }),
            BackendKind::Noisy => {
                let noisy = self.spec.noisy.as_ref().unwrap();
                let truth = self.truth_for(segment, target);
                let (tpr, tnr) = match target {
                    QueryTarget::Cue(cue) => {
                        (*noisy.tpr.per_cue().get(cue), *noisy.tnr.per_cue().get(cue))
                    }
                    _ => (noisy.final_tpr, noisy.final_tnr),
                };
                let draw = noise_draw(noisy.seed, &segment.segment.segment_id, &target.label());
                Ok(QueryOutcome {
                    value: noisy_answer(truth, tpr, tnr, draw),
                    confidence: None,
                    raw_response: None,
                    parse_failed: false,
                })
            }
            BackendKind::Remote | BackendKind::Replay => {
                if let QueryTarget::Cue(cue) = target {
                    if cue.needs_audio() && !modality.mode.has_audio() {
                        return Err(Error::validation(format!(
                            "{cue} needs audio but the modality is {}; a remote model cannot hear it",
                            modality.mode
                        )));
                    }
                }
                let agent = self.agent.as_ref().unwrap();
                let prompt = build_prompt(&segment.segment, target, modality, variant, prior)?;
                let key = cache_key(
                    &segment.segment.segment_id,
                    target,
                    modality,
                    variant,
                    agent.model(),
                );
                let raw = agent.fetch(
                    &key,
                    &prompt,
                    &self.backend_id(),
                    &segment.segment.segment_id,
                    &target.label(),
                )?;
                let (value, parse_failed) = match parse_answer(&raw) {
                    Ok(v) => (v, false),
                    Err(_) => (false, true),
                };
                Ok(QueryOutcome {
                    value,
                    confidence: None,
                    raw_response: Some(raw),
                    parse_failed,
                })
            }
        }
    }

    /// Answer a set of cue questions, collecting them into CuePredictions.
    pub fn predict(
        &self,
        segment: &LabeledSegment,
        cues: &[Cue],
        modality: &ModalityConfig,
        variant: &PromptVariant,
    ) -> Result<CuePredictions> {
        let mut out = CuePredictions::new(&segment.segment.segment_id, &self.backend_id());
        for &cue in cues {
            let q = self.query(segment, QueryTarget::Cue(cue), modality, variant, None)?;
            out.values.set(cue, Some(q.value));
            out.confidence.set(cue, q.confidence);
            out.raw_responses.set(cue, q.raw_response);
            out.parse_failures.set(cue, q.parse_failed);
        }
        Ok(out)
    }

    /// Ask the final interaction question given prior cue answers (the
    /// graph-final flow; AUTO variants ignore `prior`).
    pub fn predict_final(
        &self,
        segment: &LabeledSegment,
        modality: &ModalityConfig,
        variant: &PromptVariant,
        prior: Option<&CuePredictions>,
    ) -> Result<FinalPrediction> {
        let q = self.query(segment, QueryTarget::Final, modality, variant, prior)?;
        Ok(FinalPrediction {
            value: q.value,
            raw_response: q.raw_response,
            parse_failed: q.parse_failed,
        })
    }

    /// Ask the bare interaction question with no cue scaffolding.
    pub fn predict_direct(
        &self,
        segment: &LabeledSegment,
        modality: &ModalityConfig,
    ) -> Result<FinalPrediction> {
        let q = self.query(
            segment,
            QueryTarget::Direct,
            modality,
            &PromptVariant::auto(),
            None,
        )?;
        Ok(FinalPrediction {
            value: q.value,
            raw_response: q.raw_response,
            parse_failed: q.parse_failed,
        })
    }
}
