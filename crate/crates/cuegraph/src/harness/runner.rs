//! Experiment execution: a bounded worker pool evaluates segments, an
//! in-order writer appends one JSON line per segment, and metrics are
//! aggregated from the full record log. Records are written strictly in
//! dataset order, so output bytes do not depend on parallelism and an
//! interrupted run can resume from the valid prefix.

use crate::cue::{Cue, CueMap, CueVector};
use crate::dataset::{DatasetManifest, LabeledSegment};
use crate::detectors::{CuePredictions, Detector, ModalityConfig, PromptVariant, QueryTarget};
use crate::error::{Error, Result};
use crate::graph::{self, CueSource, Decision, StepReason};
use crate::harness::{ComponentMask, DatasetSource, ExperimentConfig};
use crate::metrics::{cue_metrics, itm, sim, ConfusionMatrix, MetricsReport, RunMetadata};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const ERRORS_FILE: &str = "errors.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub(crate) const CONFIG_FILE: &str = "run_config.json";

/// Everything recorded about one evaluated segment. The log of these lines
/// is sufficient to recompute the full MetricsReport offline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub segment_id: String,
    pub truth_cues: CueVector,
    pub ground_truth: bool,
    pub predictions: CueMap<Option<bool>>,
    pub parse_failures: u32,
    pub predicted_interaction: bool,
    pub queries_issued: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// Set when the segment failed; such records carry no predictions and
    /// are excluded from metrics (but counted).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub records: Vec<RunRecord>,
    pub output_dir: PathBuf,
    /// Records adopted from a previous interrupted run.
    pub resumed: usize,
    /// Segments evaluated in this invocation.
    pub evaluated: usize,
}

pub(crate) fn load_dataset(source: &DatasetSource) -> Result<DatasetManifest> {
    match source {
        DatasetSource::Manifest(path) => crate::dataset::load_manifest(path),
        DatasetSource::Generate(config) => crate::synthgen::generate(config),
    }
}

/// Answers graph queries from the detector, pinning masked cues to false
/// without consulting the backend, and collects what was actually asked.
struct BackendSource<'a> {
    detector: &'a Detector,
    segment: &'a LabeledSegment,
    modality: &'a ModalityConfig,
    variant: &'a PromptVariant,
    mask: ComponentMask,
    predictions: CueMap<Option<bool>>,
    parse_failures: u32,
    backend_queries: u32,
}

impl CueSource for BackendSource<'_> {
    fn query(&mut self, cue: Cue) -> Result<bool> {
        if self.mask.masks(cue) {
            return Ok(false);
        }
        let q = self.detector.query(
            self.segment,
            QueryTarget::Cue(cue),
            self.modality,
            self.variant,
            None,
        )?;
        self.backend_queries += 1;
        self.predictions.set(cue, Some(q.value));
        if q.parse_failed {
            self.parse_failures += 1;
        }
        Ok(q.value)
    }
}

fn evaluate_segment(
    detector: &Detector,
    labeled: &LabeledSegment,
    config: &ExperimentConfig,
) -> Result<RunRecord> {
    let segment_id = labeled.segment.segment_id.clone();
    if config.component_mask == ComponentMask::BaselineDirect {
        let f = detector.predict_direct(labeled, &config.modality)?;
        return Ok(RunRecord {
            segment_id,
            truth_cues: labeled.consensus,
            ground_truth: labeled.ground_truth_interaction,
            predictions: CueMap::default(),
            parse_failures: f.parse_failed as u32,
            predicted_interaction: f.value,
            queries_issued: 1,
            decision: None,
            error: None,
        });
    }
    let mut source = BackendSource {
        detector,
        segment: labeled,
        modality: &config.modality,
        variant: &config.variant,
        mask: config.component_mask,
        predictions: CueMap::default(),
        parse_failures: 0,
        backend_queries: 0,
    };
    let mut decision = graph::evaluate(&segment_id, &mut source, config.policy)?;
    // The graph saw masked cues as ordinary queries answering false; in the
    // record they are gate defaults, not backend answers.
    for step in &mut decision.trace.steps {
        if step.queried && config.component_mask.masks(step.cue) {
            step.queried = false;
            step.reason = StepReason::GatedDefaultFalse;
        }
    }
    Ok(RunRecord {
        segment_id,
        truth_cues: labeled.consensus,
        ground_truth: labeled.ground_truth_interaction,
        predictions: source.predictions,
        parse_failures: source.parse_failures,
        predicted_interaction: decision.interacting,
        queries_issued: source.backend_queries,
        decision: Some(decision),
        error: None,
    })
}

fn error_record(labeled: &LabeledSegment, error: String) -> RunRecord {
    RunRecord {
        segment_id: labeled.segment.segment_id.clone(),
        truth_cues: labeled.consensus,
        ground_truth: labeled.ground_truth_interaction,
        predictions: CueMap::default(),
        parse_failures: 0,
        predicted_interaction: false,
        queries_issued: 0,
        decision: None,
        error: Some(error),
    }
}

/// Compute a MetricsReport from run records. Errored records are excluded
/// from every metric and surfaced via segment_error_count.
pub(crate) fn aggregate(
    metadata: RunMetadata,
    records: &[RunRecord],
    partial: bool,
) -> Result<MetricsReport> {
    let mut cm = ConfusionMatrix::default();
    let mut parse_failure_count = 0u64;
    let mut segment_error_count = 0u64;
    let mut predictions = Vec::new();
    let mut truths = BTreeMap::new();
    let mut any_cue_values = false;
    for r in records {
        if r.error.is_some() {
            segment_error_count += 1;
            continue;
        }
        cm.add(r.predicted_interaction, r.ground_truth);
        parse_failure_count += u64::from(r.parse_failures);
        truths.insert(r.segment_id.clone(), r.truth_cues);
        let mut p = CuePredictions::new(&r.segment_id, &metadata.backend);
        p.values = r.predictions;
        if Cue::ALL.iter().any(|&c| p.values.get(c).is_some()) {
            any_cue_values = true;
        }
        predictions.push(p);
    }
    let cue_report = if any_cue_values {
        Some(cue_metrics(&predictions, &truths)?)
    } else {
        None
    };
    Ok(MetricsReport {
        metadata,
        interaction_confusion: cm,
        itm: itm(&cm).ok(),
        sim: sim(&cm).ok(),
        cue_report,
        parse_failure_count,
        segment_error_count,
        partial,
    })
}

/// Require the output directory to belong to this exact config; adopt it
/// if fresh.
fn claim_output_dir(config: &ExperimentConfig) -> Result<()> {
    let path = config.output_dir.join(CONFIG_FILE);
    let current = serde_json::to_value(config)?;
    match std::fs::read_to_string(&path) {
        Ok(text) => {
            let stored: serde_json::Value = serde_json::from_str(&text)?;
            if stored != current {
                return Err(Error::validation(format!(
                    "{} already holds a run with a different config; refusing to mix outputs",
                    config.output_dir.display()
                )));
            }
            Ok(())
        }
        Err(e) if e.kind() == ErrorKind::NotFound => {
            let mut text = serde_json::to_string_pretty(&current)?;
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
        }
        Err(e) => Err(Error::io(&path, e)),
    }
}

/// Read the valid record prefix from an earlier run, truncating any torn
/// or corrupt tail, and check it matches the dataset's leading segments.
fn load_resume_prefix(path: &Path, manifest: &DatasetManifest) -> Result<Vec<RunRecord>> {
    let data = match std::fs::read(path) {
        Ok(d) => d,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut records = Vec::new();
    let mut valid_end = 0usize;
    let mut pos = 0usize;
    while pos < data.len() {
        let Some(rel) = data[pos..].iter().position(|&b| b == b'\n') else {
            break; // torn final line
        };
        match serde_json::from_slice::<RunRecord>(&data[pos..pos + rel]) {
            Ok(r) => {
                records.push(r);
                pos += rel + 1;
                valid_end = pos;
            }
            Err(_) => break, // corrupt line
        }
    }
    if valid_end < data.len() {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.set_len(valid_end as u64).map_err(|e| Error::io(path, e))?;
    }
    if records.len() > manifest.segments.len() {
        return Err(Error::validation(format!(
            "{} holds {} records but the dataset has only {} segments",
            path.display(),
            records.len(),
            manifest.segments.len()
        )));
    }
    for (record, segment) in records.iter().zip(&manifest.segments) {
        if record.segment_id != segment.segment.segment_id {
            return Err(Error::validation(format!(
                "resume mismatch: stored record {} does not line up with dataset segment {}",
                record.segment_id, segment.segment.segment_id
            )));
        }
    }
    Ok(records)
}

fn append_writer(path: &Path) -> Result<BufWriter<File>> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TimingLine<'a> {
    segment_id: &'a str,
    wall_s: f64,
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    segment_id: &'a str,
    error: &'a str,
}

/// Execute an experiment: evaluate every segment of the dataset through
/// the backend and graph, streaming records to output_dir, then aggregate
/// and write the metrics report.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let manifest = load_dataset(&config.dataset)?;
    if manifest.segments.is_empty() {
        return Err(Error::validation("dataset has no segments"));
    }
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::io(&config.output_dir, e))?;
    claim_output_dir(config)?;

    let records_path = config.output_dir.join(RECORDS_FILE);
    let existing = load_resume_prefix(&records_path, &manifest)?;
    let resumed = existing.len();
    let detector = Detector::new(&config.backend)?;

    let n = manifest.segments.len();
    let budget_limit = config.failure_budget * n as f64;
    let prior_failures = existing.iter().filter(|r| r.error.is_some()).count();

    let mut records_out = append_writer(&records_path)?;
    let mut timings_out = append_writer(&config.output_dir.join(TIMINGS_FILE))?;
    let mut errors_out = append_writer(&config.output_dir.join(ERRORS_FILE))?;

    let mut records = existing;
    let stop = AtomicBool::new(prior_failures as f64 > budget_limit);
    let next = AtomicUsize::new(resumed);
    let failures = AtomicUsize::new(prior_failures);
    let (tx, rx) = mpsc::channel::<(usize, RunRecord, f64)>();

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..config.parallelism {
            let tx = tx.clone();
            let detector = &detector;
            let manifest = &manifest;
            let stop = &stop;
            let next = &next;
            let failures = &failures;
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let started = Instant::now();
                let labeled = &manifest.segments[i];
                let record = match evaluate_segment(detector, labeled, config) {
                    Ok(r) => r,
                    Err(e) => {
                        let total = failures.fetch_add(1, Ordering::Relaxed) + 1;
                        if total as f64 > budget_limit {
                            stop.store(true, Ordering::Relaxed);
                        }
                        error_record(labeled, e.to_string())
                    }
                };
                if tx.send((i, record, started.elapsed().as_secs_f64())).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Workers claim indices in order and every claimed index reports
        // back, so buffering by index yields a gap-free stream.
        let mut pending: BTreeMap<usize, (RunRecord, f64)> = BTreeMap::new();
        let mut next_write = resumed;
        for (i, record, wall_s) in rx {
            pending.insert(i, (record, wall_s));
            while let Some((record, wall_s)) = pending.remove(&next_write) {
                let mut line = serde_json::to_string(&record)?;
                line.push('\n');
                records_out
                    .write_all(line.as_bytes())
                    .map_err(|e| Error::io(&records_path, e))?;
                let mut tline = serde_json::to_string(&TimingLine {
                    segment_id: &record.segment_id,
                    wall_s,
                })?;
                tline.push('\n');
                timings_out
                    .write_all(tline.as_bytes())
                    .map_err(|e| Error::io(config.output_dir.join(TIMINGS_FILE), e))?;
                if let Some(error) = &record.error {
                    let mut eline = serde_json::to_string(&ErrorLine {
                        segment_id: &record.segment_id,
                        error,
                    })?;
                    eline.push('\n');
                    errors_out
                        .write_all(eline.as_bytes())
                        .map_err(|e| Error::io(config.output_dir.join(ERRORS_FILE), e))?;
                }
                records.push(record);
                next_write += 1;
            }
        }
        debug_assert!(pending.is_empty());
        Ok(())
    })?;

    records_out.flush().map_err(|e| Error::io(&records_path, e))?;
    timings_out
        .flush()
        .map_err(|e| Error::io(config.output_dir.join(TIMINGS_FILE), e))?;
    errors_out
        .flush()
        .map_err(|e| Error::io(config.output_dir.join(ERRORS_FILE), e))?;

    let partial = records.len() < n;
    let metadata = config.metadata(&manifest.name, n as u64);
    let report = aggregate(metadata, &records, partial)?;
    let report_path = config.output_dir.join(REPORT_FILE);
    std::fs::write(&report_path, report.to_json()).map_err(|e| Error::io(&report_path, e))?;

    let evaluated = records.len() - resumed;
    Ok(RunOutcome {
        report,
        records,
        output_dir: config.output_dir.clone(),
        resumed,
        evaluated,
    })
}
