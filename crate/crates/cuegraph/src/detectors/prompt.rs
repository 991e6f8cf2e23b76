//! Prompt assembly: modality handling, frame sampling, transcript
//! rendering, template substitution, and cache keys. Templates live in
//! `prompts/` and are embedded at compile time so a binary is
//! self-contained and a template edit shows up in version control.

use crate::cue::Cue;
use crate::dataset::{Segment, Speaker, Utterance};
use crate::detectors::CuePredictions;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

const CUE_QUERY_TEMPLATE: &str = include_str!("../../prompts/cue_query.txt");
const FINAL_AUTO_TEMPLATE: &str = include_str!("../../prompts/final_auto.txt");
const FINAL_GRAPH_TEMPLATE: &str = include_str!("../../prompts/final_graph.txt");
const FINAL_DIRECT_TEMPLATE: &str = include_str!("../../prompts/final_direct.txt");
const STYLE_DEP: &str = include_str!("../../prompts/style_dep.txt");
const STYLE_THINK: &str = include_str!("../../prompts/style_think.txt");
const STYLE_HIER: &str = include_str!("../../prompts/style_hier.txt");
const ANSWER_PLAIN: &str = "Answer with one word, yes or no.";

pub const FINAL_QUESTION: &str = "Am I in a social interaction with someone?";

/// Which input channels the model sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    VideoOnly,
    AudioVideo,
    AudioVideoText,
    AudioVideoTextConv,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::VideoOnly,
        Mode::AudioVideo,
        Mode::AudioVideoText,
        Mode::AudioVideoTextConv,
    ];

    pub fn has_audio(self) -> bool {
        self != Mode::VideoOnly
    }

    pub fn has_text(self) -> bool {
        matches!(self, Mode::AudioVideoText | Mode::AudioVideoTextConv)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::VideoOnly => "VIDEO_ONLY",
            Mode::AudioVideo => "AUDIO_VIDEO",
            Mode::AudioVideoText => "AUDIO_VIDEO_TEXT",
            Mode::AudioVideoTextConv => "AUDIO_VIDEO_TEXT_CONV",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown modality mode {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModalityConfig {
    pub mode: Mode,
    pub frame_budget: u32,
}

impl Default for ModalityConfig {
    fn default() -> Self {
        ModalityConfig {
            mode: Mode::AudioVideo,
            frame_budget: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptBase {
    #[default]
    Auto,
    Graph,
}

impl PromptBase {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptBase::Auto => "auto",
            PromptBase::Graph => "graph",
        }
    }
}

/// Final-question prompt shape: the base plus optional style flags, written
/// compactly as e.g. "graph-dep-think-hier".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PromptVariant {
    pub base: PromptBase,
    pub dep: bool,
    pub think: bool,
    pub hier: bool,
}

impl PromptVariant {
    pub fn auto() -> Self {
        PromptVariant::default()
    }

    pub fn graph() -> Self {
        PromptVariant {
            base: PromptBase::Graph,
            ..PromptVariant::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dep && self.base != PromptBase::Graph {
            return Err(Error::validation(
                "variant flag 'dep' requires the graph base (there are no cue answers to rely on otherwise)",
            ));
        }
        Ok(())
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base.as_str())?;
        for (on, tag) in [(self.dep, "dep"), (self.think, "think"), (self.hier, "hier")] {
            if on {
                write!(f, "-{tag}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for PromptVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<PromptVariant> {
        let mut parts = s.split('-');
        let base = match parts.next() {
            Some("auto") => PromptBase::Auto,
            Some("graph") => PromptBase::Graph,
            other => {
                return Err(Error::validation(format!(
                    "variant must start with auto or graph, got {other:?}"
                )))
            }
        };
        let mut v = PromptVariant {
            base,
            ..PromptVariant::default()
        };
        for part in parts {
            let flag = match part {
                "dep" => &mut v.dep,
                "think" => &mut v.think,
                "hier" => &mut v.hier,
                other => {
                    return Err(Error::validation(format!("unknown variant flag {other:?}")))
                }
            };
            if *flag {
                return Err(Error::validation(format!("repeated variant flag {part:?}")));
            }
            *flag = true;
        }
        v.validate()?;
        Ok(v)
    }
}

impl Serialize for PromptVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Fields {
                base: PromptBase,
                #[serde(default)]
                dep: bool,
                #[serde(default)]
                think: bool,
                #[serde(default)]
                hier: bool,
            },
        }
        let v = match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom)?,
            Repr::Fields {
                base,
                dep,
                think,
                hier,
            } => PromptVariant {
                base,
                dep,
                think,
                hier,
            },
        };
        v.validate().map_err(serde::de::Error::custom)?;
        Ok(v)
    }
}

/// What a single backend query asks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueryTarget {
    Cue(Cue),
    /// The interaction question, given the configured variant.
    Final,
    /// The interaction question with no cue scaffolding (baseline).
    Direct,
}

impl QueryTarget {
    /// Stable label used in cache keys and error messages.
    pub fn label(&self) -> String {
        match self {
            QueryTarget::Cue(c) => format!("cue:{}", c.key()),
            QueryTarget::Final => "final".into(),
            QueryTarget::Direct => "direct".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Frame,
    Audio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaItem {
    pub kind: MediaKind,
    pub reference: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    pub media: Vec<MediaItem>,
}

/// Evenly sample `k` of `n` frame indices, always starting at frame 0 and,
/// for k > 1, ending at the last frame.
pub fn sample_frame_indices(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    if k <= 1 {
        return vec![0];
    }
    (0..k).map(|i| i * (n - 1) / (k - 1)).collect()
}

/// Render a transcript either flat (texts joined by spaces) or in
/// conversation form with one "Speaker: text" line per utterance.
pub fn format_transcript(transcript: &[Utterance], conv: bool) -> String {
    if conv {
        transcript
            .iter()
            .map(|u| {
                let label = match u.speaker {
                    Speaker::Wearer => "Me".to_string(),
                    Speaker::Other(n) => format!("Speaker {n}"),
                    Speaker::Unknown => "Speaker ?".to_string(),
                };
                format!("{label}: {}", u.text)
            })
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        transcript
            .iter()
            .map(|u| u.text.as_str())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn transcript_block(segment: &Segment, mode: Mode) -> Result<String> {
    if !mode.has_text() {
        return Ok(String::new());
    }
    let transcript = segment.transcript.as_ref().ok_or_else(|| {
        Error::validation(format!(
            "mode {mode} needs a transcript but segment {} has none",
            segment.segment_id
        ))
    })?;
    let conv = mode == Mode::AudioVideoTextConv;
    let body = format_transcript(transcript, conv);
    if body.is_empty() {
        return Ok(String::new());
    }
    Ok(if conv {
        format!("Conversation transcript:\n{body}")
    } else {
        format!("Audio transcript: {body}")
    })
}

fn style_block(variant: &PromptVariant) -> String {
    let mut parts = Vec::new();
    if variant.dep {
        parts.push(STYLE_DEP.trim_end());
    }
    if variant.hier {
        parts.push(STYLE_HIER.trim_end());
    }
    parts.push(if variant.think {
        STYLE_THINK.trim_end()
    } else {
        ANSWER_PLAIN
    });
    parts.join("\n")
}

fn triplet_block(prior: &CuePredictions) -> Result<String> {
    let mut lines = Vec::new();
    for cue in Cue::ALL {
        let value = (*prior.values.get(cue)).ok_or_else(|| {
            Error::validation(format!(
                "graph final prompt needs all eight cues answered; {cue} is missing"
            ))
        })?;
        let word = if value { "yes" } else { "no" };
        lines.push(format!("(wearer, {}, {word})", cue.question()));
    }
    Ok(lines.join("\n"))
}

fn media_list(segment: &Segment, modality: &ModalityConfig) -> Result<Vec<MediaItem>> {
    let n = segment.frame_times.len();
    let k = modality.frame_budget as usize;
    if k == 0 {
        return Err(Error::validation("frame_budget must be positive"));
    }
    if k > n {
        return Err(Error::validation(format!(
            "frame_budget {k} exceeds the {n} frames of segment {}",
            segment.segment_id
        )));
    }
    let mut media: Vec<MediaItem> = sample_frame_indices(n, k)
        .into_iter()
        .map(|i| MediaItem {
            kind: MediaKind::Frame,
            reference: segment.frame_refs[i].clone(),
        })
        .collect();
    if modality.mode.has_audio() {
        let audio = segment.audio_ref.as_ref().ok_or_else(|| {
            Error::validation(format!(
                "mode {} needs audio but segment {} has no audio_ref",
                modality.mode, segment.segment_id
            ))
        })?;
        media.push(MediaItem {
            kind: MediaKind::Audio,
            reference: audio.clone(),
        });
    }
    Ok(media)
}

/// Assemble the prompt text and media attachments for one query. Pure in
/// its arguments, so a cache hit is sound.
pub fn build_prompt(
    segment: &Segment,
    target: QueryTarget,
    modality: &ModalityConfig,
    variant: &PromptVariant,
    prior: Option<&CuePredictions>,
) -> Result<Prompt> {
    variant.validate()?;
    let media = media_list(segment, modality)?;
    let transcript = transcript_block(segment, modality.mode)?;
    let text = match target {
        QueryTarget::Cue(cue) => CUE_QUERY_TEMPLATE
            .replace("{TRANSCRIPT}", &transcript)
            .replace("{CUE_QUESTION}", cue.question()),
        QueryTarget::Direct => FINAL_DIRECT_TEMPLATE.replace("{TRANSCRIPT}", &transcript),
        QueryTarget::Final => {
            let style = style_block(variant);
            match variant.base {
                PromptBase::Auto => {
                    let questions = Cue::ALL
                        .map(|c| format!("- {}", c.question()))
                        .join("\n");
                    FINAL_AUTO_TEMPLATE
                        .replace("{CUE_QUESTIONS}", &questions)
                        .replace("{TRANSCRIPT}", &transcript)
                        .replace("{STYLE}", &style)
                }
                PromptBase::Graph => {
                    let prior = prior.ok_or_else(|| {
                        Error::validation("graph final prompt needs prior cue predictions")
                    })?;
                    FINAL_GRAPH_TEMPLATE
                        .replace("{TRIPLETS}", &triplet_block(prior)?)
                        .replace("{TRANSCRIPT}", &transcript)
                        .replace("{STYLE}", &style)
                }
            }
        }
    };
    Ok(Prompt { text, media })
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    v: u32,
    model: &'a str,
    segment_id: &'a str,
    target: String,
    mode: &'static str,
    frame_budget: u32,
    base: &'static str,
    dep: bool,
    think: bool,
    hier: bool,
}

/// Deterministic cache key for one query. Cue queries ignore the variant
/// (it only shapes final prompts), so cue answers are shared across
/// variant sweeps; final keys carry the full variant.
pub fn cache_key(
    segment_id: &str,
    target: QueryTarget,
    modality: &ModalityConfig,
    variant: &PromptVariant,
    model: &str,
) -> String {
    let styled = matches!(target, QueryTarget::Final);
    let canonical = PromptVariant::auto();
    let v = if styled { variant } else { &canonical };
    let material = KeyMaterial {
        v: 1,
        model,
        segment_id,
        target: target.label(),
        mode: modality.mode.as_str(),
        frame_budget: modality.frame_budget,
        base: v.base.as_str(),
        dep: v.dep,
        think: v.think,
        hier: v.hier,
    };
    let json = serde_json::to_string(&material).unwrap();
    hex::encode(Sha256::digest(json.as_bytes()))
}
