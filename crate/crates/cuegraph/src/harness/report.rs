//! Load a finished run directory and recompute its metrics from the raw
//! records, so a stored report can be audited without re-running anything.

use crate::error::{Error, Result};
use crate::harness::runner::{self, RunRecord, CONFIG_FILE, RECORDS_FILE, REPORT_FILE};
use crate::harness::ExperimentConfig;
use crate::metrics::MetricsReport;
use std::path::Path;

/// A run directory pulled back into memory: the config snapshot, the
/// per-segment records, the report as written, and the same report
/// recomputed from the records.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub stored: MetricsReport,
    pub recomputed: MetricsReport,
}

impl LoadedRun {
    /// Field-by-field differences between the stored and recomputed
    /// reports. Empty means the stored report matches its records.
    pub fn mismatches(&self) -> Vec<String> {
        let s = &self.stored;
        let r = &self.recomputed;
        let mut out = Vec::new();
        if s.interaction_confusion != r.interaction_confusion {
            out.push(format!(
                "interaction confusion stored {:?} != recomputed {:?}",
                s.interaction_confusion, r.interaction_confusion
            ));
        }
        if s.itm != r.itm {
            out.push(format!("itm stored {:?} != recomputed {:?}", s.itm, r.itm));
        }
        if s.sim != r.sim {
            out.push(format!("sim stored {:?} != recomputed {:?}", s.sim, r.sim));
        }
        if s.cue_report != r.cue_report {
            out.push("per-cue stats differ from records".to_string());
        }
        if s.parse_failure_count != r.parse_failure_count {
            out.push(format!(
                "parse_failure_count stored {} != recomputed {}",
                s.parse_failure_count, r.parse_failure_count
            ));
        }
        if s.segment_error_count != r.segment_error_count {
            out.push(format!(
                "segment_error_count stored {} != recomputed {}",
                s.segment_error_count, r.segment_error_count
            ));
        }
        out
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(line).map_err(|e| {
            Error::validation(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Read a run directory and recompute metrics from its records. The
/// recomputation reuses the stored report's metadata and partial flag;
/// everything else is rebuilt from records.jsonl.
pub fn load_run_dir(dir: &Path) -> Result<LoadedRun> {
    let config = ExperimentConfig::from_json(&read_to_string(&dir.join(CONFIG_FILE))?)?;
    let records = read_records(&dir.join(RECORDS_FILE))?;
    let stored = MetricsReport::from_json(&read_to_string(&dir.join(REPORT_FILE))?)?;
    stored.verify_consistent()?;
    let recomputed = runner::aggregate(stored.metadata.clone(), &records, stored.partial)?;
    Ok(LoadedRun {
        config,
        records,
        stored,
        recomputed,
    })
}

/// Recompute a run's report from its records, failing if the stored report
/// does not match what the records say.
pub fn recompute_report(dir: &Path) -> Result<MetricsReport> {
    let run = load_run_dir(dir)?;
    let mismatches = run.mismatches();
    if !mismatches.is_empty() {
        return Err(Error::validation(format!(
            "stored report in {} does not match its records: {}",
            dir.display(),
            mismatches.join("; ")
        )));
    }
    Ok(run.recomputed)
}
