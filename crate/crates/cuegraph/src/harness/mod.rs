//! Experiment orchestration: configuration, the segment-evaluation runner,
//! ablation sweeps, and report recomputation from stored run records.

mod report;
mod runner;
mod sweep;

pub use report::{load_run_dir, recompute_report, LoadedRun};
pub use runner::{run, RunOutcome, RunRecord, ERRORS_FILE, RECORDS_FILE, REPORT_FILE, TIMINGS_FILE};
pub use sweep::{sweep, CellResult, SweepGrid, SweepOutcome};

use crate::cue::Cue;
use crate::detectors::{BackendKind, BackendSpec, Mode, ModalityConfig, PromptVariant};
use crate::error::{Error, Result};
use crate::graph::GatePolicy;
use crate::metrics::RunMetadata;
use crate::synthgen::GeneratorConfig;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Which pipeline branch runs: the whole graph, one branch with the other
/// branch's cues pinned false, or no graph at all (direct final question).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ComponentMask {
    #[default]
    Full,
    ApgOnly,
    VpgOnly,
    BaselineDirect,
}

impl ComponentMask {
    pub const ALL: [ComponentMask; 4] = [
        ComponentMask::Full,
        ComponentMask::ApgOnly,
        ComponentMask::VpgOnly,
        ComponentMask::BaselineDirect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentMask::Full => "FULL",
            ComponentMask::ApgOnly => "APG_ONLY",
            ComponentMask::VpgOnly => "VPG_ONLY",
            ComponentMask::BaselineDirect => "BASELINE_DIRECT",
        }
    }

    /// True when this mask pins `cue` to effective false without querying.
    pub fn masks(self, cue: Cue) -> bool {
        match self {
            ComponentMask::Full => false,
            ComponentMask::ApgOnly => cue.is_visual(),
            ComponentMask::VpgOnly => cue.needs_audio(),
            ComponentMask::BaselineDirect => true,
        }
    }

    /// True when any unmasked cue needs audio (used for fail-fast checks).
    pub fn queries_audio_cues(self) -> bool {
        Cue::ALL.iter().any(|&c| c.needs_audio() && !self.masks(c))
    }
}

impl fmt::Display for ComponentMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentMask {
    type Err = Error;
    fn from_str(s: &str) -> Result<ComponentMask> {
        ComponentMask::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::validation(format!("unknown component mask {s:?}")))
    }
}

/// Where the dataset comes from: a manifest on disk or a generator config
/// evaluated on the fly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Manifest(PathBuf),
    Generate(GeneratorConfig),
}

fn default_parallelism() -> usize {
    1
}
fn default_failure_budget() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub backend: BackendSpec,
    pub modality: ModalityConfig,
    #[serde(default)]
    pub variant: PromptVariant,
    pub policy: GatePolicy,
    #[serde(default)]
    pub component_mask: ComponentMask,
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub seed: u64,
    /// Abort once more than this fraction of segments has errored.
    #[serde(default = "default_failure_budget")]
    pub failure_budget: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.backend.validate()?;
        self.variant.validate()?;
        if let DatasetSource::Generate(g) = &self.dataset {
            g.validate()?;
        }
        if self.parallelism == 0 {
            return Err(Error::validation("parallelism must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            return Err(Error::validation("failure_budget must be in [0, 1]"));
        }
        if self.modality.frame_budget == 0 {
            return Err(Error::validation("frame_budget must be positive"));
        }
        let remote_like = matches!(self.backend.kind, BackendKind::Remote | BackendKind::Replay);
        if remote_like
            && self.modality.mode == Mode::VideoOnly
            && self.component_mask.queries_audio_cues()
        {
            return Err(Error::validation(format!(
                "mask {} would query audio cues, which a remote model cannot answer under VIDEO_ONLY; use VPG_ONLY or BASELINE_DIRECT",
                self.component_mask
            )));
        }
        Ok(())
    }

    /// Backend identity string without constructing the backend.
    pub fn backend_label(&self) -> String {
        match self.backend.kind {
            BackendKind::Oracle => "oracle".into(),
            BackendKind::Noisy => {
                format!("noisy(seed={})", self.backend.noisy.as_ref().unwrap().seed)
            }
            BackendKind::Remote => {
                format!("remote({})", self.backend.remote.as_ref().unwrap().model)
            }
            BackendKind::Replay => {
                format!("replay({})", self.backend.remote.as_ref().unwrap().model)
            }
        }
    }

    pub fn metadata(&self, dataset_name: &str, segments: u64) -> RunMetadata {
        RunMetadata {
            backend: self.backend_label(),
            modality: self.modality.mode.to_string(),
            frame_budget: self.modality.frame_budget,
            variant: self.variant.to_string(),
            policy: self.policy.to_string(),
            component_mask: self.component_mask.to_string(),
            seed: self.seed,
            dataset: dataset_name.to_string(),
            segments,
        }
    }
}

/// Baseline oracle config over a small generated dataset, for tests.
#[cfg(test)]
pub(crate) fn oracle_config(out: PathBuf, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetSource::Generate(crate::synthgen::demo_config(n, 1)),
        backend: BackendSpec::oracle(),
        modality: ModalityConfig::default(),
        variant: PromptVariant::auto(),
        policy: GatePolicy::Eager,
        component_mask: ComponentMask::Full,
        output_dir: out,
        parallelism: 1,
        seed: 0,
        failure_budget: 0.05,
    }
}
