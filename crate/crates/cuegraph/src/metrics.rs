//! Evaluation measures: confusion counts, intervention-timing metric,
//! social-interaction metric (macro F1), per-cue accuracy reports, and
//! run-comparison tables.

use crate::cue::{Cue, CueMap, CueVector};
use crate::detectors::CuePredictions;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Binary confusion counts; the positive class is "interaction present"
/// (or "cue present" for per-cue reports).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub tpc: u64,
    #[serde(rename = "fp")]
    pub fpc: u64,
    #[serde(rename = "fn")]
    pub fnc: u64,
    #[serde(rename = "tn")]
    pub tnc: u64,
}

impl ConfusionMatrix {
    pub fn new(tpc: u64, fpc: u64, fnc: u64, tnc: u64) -> Self {
        ConfusionMatrix { tpc, fpc, fnc, tnc }
    }

    pub fn add(&mut self, predicted: bool, truth: bool) {
        match (predicted, truth) {
            (true, true) => self.tpc += 1,
            (true, false) => self.fpc += 1,
            (false, true) => self.fnc += 1,
            (false, false) => self.tnc += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tpc + self.fpc + self.fnc + self.tnc
    }
}

/// Tally predictions against truths (positive class = `true`).
pub fn confusion(predictions: &[bool], truths: &[bool]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} predictions vs {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::validation("confusion needs at least one pair"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        cm.add(p, t);
    }
    Ok(cm)
}

/// Intervention-timing metric: recall on the negative (no-interaction)
/// class, `tn / (tn + fp)`, the fraction of truly interruption-safe
/// segments the system leaves open for intervention.
pub fn itm(cm: &ConfusionMatrix) -> Result<f64> {
    let denom = cm.tnc + cm.fpc;
    if denom == 0 {
        return Err(Error::UndefinedMetric(
            "itm needs at least one actually-negative segment",
        ));
    }
    Ok(cm.tnc as f64 / denom as f64)
}

/// Per-class F1 with the 0/0 -> 0 convention, positive class first.
fn f1_pair(cm: &ConfusionMatrix) -> (f64, f64) {
    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }
    fn f1(precision: f64, recall: f64) -> f64 {
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
    let pos = f1(ratio(cm.tpc, cm.tpc + cm.fpc), ratio(cm.tpc, cm.tpc + cm.fnc));
    // Negative-class counts mirror the positive ones: its true positives are
    // tn, its false positives are fn, its false negatives are fp.
    let neg = f1(ratio(cm.tnc, cm.tnc + cm.fnc), ratio(cm.tnc, cm.tnc + cm.fpc));
    (pos, neg)
}

/// Social-interaction metric: macro F1 over the interaction and
/// no-interaction classes, with any 0/0 ratio defined as 0.
pub fn sim(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::validation("sim needs a non-empty confusion matrix"));
    }
    let (pos, neg) = f1_pair(cm);
    Ok((pos + neg) / 2.0)
}

/// Per-cue detection quality in the three-statistic form: accuracy on
/// actually-positive segments, accuracy on actually-negative segments, and
/// macro F1. `None` marks undefined values (no data on that side).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueStats {
    pub positive_accuracy: Option<f64>,
    pub negative_accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub counts: ConfusionMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueReport {
    pub per_cue: CueMap<CueStats>,
}

/// Score per-cue predictions against per-segment truth vectors. Cues a
/// prediction left unqueried are excluded for that segment; a prediction
/// without a matching truth is an error.
pub fn cue_metrics(
    predictions: &[CuePredictions],
    truths: &BTreeMap<String, CueVector>,
) -> Result<CueReport> {
    let mut counts: CueMap<ConfusionMatrix> = CueMap::default();
    for p in predictions {
        let truth = truths.get(&p.segment_id).ok_or_else(|| {
            Error::validation(format!("no truth labels for segment {:?}", p.segment_id))
        })?;
        for cue in Cue::ALL {
            if let Some(v) = *p.values.get(cue) {
                counts.get_mut(cue).add(v, *truth.get(cue));
            }
        }
    }
    let per_cue = counts.map(|_, cm| {
        let positive_accuracy = if cm.tpc + cm.fnc > 0 {
            Some(cm.tpc as f64 / (cm.tpc + cm.fnc) as f64)
        } else {
            None
        };
        let negative_accuracy = if cm.tnc + cm.fpc > 0 {
            Some(cm.tnc as f64 / (cm.tnc + cm.fpc) as f64)
        } else {
            None
        };
        let macro_f1 = if cm.total() > 0 {
            let (pos, neg) = f1_pair(cm);
            Some((pos + neg) / 2.0)
        } else {
            None
        };
        CueStats {
            positive_accuracy,
            negative_accuracy,
            macro_f1,
            counts: *cm,
        }
    });
    Ok(CueReport { per_cue })
}

/// Identifying metadata for one run; stringly typed so reports stay
/// self-describing and sortable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub backend: String,
    pub modality: String,
    pub frame_budget: u32,
    pub variant: String,
    pub policy: String,
    pub component_mask: String,
    pub seed: u64,
    pub dataset: String,
    pub segments: u64,
}

impl RunMetadata {
    /// Stable sort/display key for comparison tables.
    pub fn key(&self) -> String {
        format!(
            "mask={} mode={} frames={} variant={} policy={} backend={} seed={}",
            self.component_mask,
            self.modality,
            self.frame_budget,
            self.variant,
            self.policy,
            self.backend,
            self.seed
        )
    }
}

/// Aggregated result of one experiment run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metadata: RunMetadata,
    pub interaction_confusion: ConfusionMatrix,
    /// `None` marks an undefined metric, serialized as JSON null.
    pub itm: Option<f64>,
    pub sim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_report: Option<CueReport>,
    pub parse_failure_count: u64,
    pub segment_error_count: u64,
    /// Set when the run aborted on its failure budget.
    pub partial: bool,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).unwrap();
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Assert that the stored itm/sim agree with the confusion matrix.
    pub fn verify_consistent(&self) -> Result<()> {
        let expect_itm = itm(&self.interaction_confusion).ok();
        let expect_sim = sim(&self.interaction_confusion).ok();
        if self.itm != expect_itm || self.sim != expect_sim {
            return Err(Error::validation(format!(
                "report metrics {:?}/{:?} do not match confusion matrix ({:?}/{:?})",
                self.itm, self.sim, expect_itm, expect_sim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub key: String,
    pub itm: Option<f64>,
    pub sim: Option<f64>,
    pub delta_itm: Option<f64>,
    pub delta_sim: Option<f64>,
}

/// Rows sorted by metadata key, with deltas against a baseline row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub baseline_key: String,
    pub rows: Vec<CompareRow>,
}

/// Build a comparison table from reports. `baseline` selects the reference
/// row by metadata key; by default the first row after sorting.
pub fn compare_runs(reports: &[MetricsReport], baseline: Option<&str>) -> Result<CompareTable> {
    if reports.is_empty() {
        return Err(Error::validation("compare_runs needs at least one report"));
    }
    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.metadata.key());
    for pair in sorted.windows(2) {
        if pair[0].metadata.key() == pair[1].metadata.key() {
            return Err(Error::validation(format!(
                "duplicate run metadata: {}",
                pair[0].metadata.key()
            )));
        }
    }
    let baseline_key = match baseline {
        Some(k) => {
            if !sorted.iter().any(|r| r.metadata.key() == k) {
                return Err(Error::validation(format!("baseline key {k:?} not found")));
            }
            k.to_string()
        }
        None => sorted[0].metadata.key(),
    };
    let base = sorted
        .iter()
        .find(|r| r.metadata.key() == baseline_key)
        .unwrap();
    let delta = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    let rows = sorted
        .iter()
        .map(|r| CompareRow {
            key: r.metadata.key(),
            itm: r.itm,
            sim: r.sim,
            delta_itm: delta(r.itm, base.itm),
            delta_sim: delta(r.sim, base.sim),
        })
        .collect();
    Ok(CompareTable { baseline_key, rows })
}

/// Render a fraction as a two-decimal percentage for tables.
pub fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn pct_opt(x: Option<f64>) -> String {
    x.map(pct).unwrap_or_else(|| "n/a".into())
}

fn pct_delta(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:+.2}", 100.0 * v),
        None => "n/a".into(),
    }
}

impl CompareTable {
    /// Full-precision CSV: `run,itm,delta_itm,sim,delta_sim`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["run", "itm", "delta_itm", "sim", "delta_sim"])
            .unwrap();
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.key.clone(),
                cell(r.itm),
                cell(r.delta_itm),
                cell(r.sim),
                cell(r.delta_sim),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Two markdown blocks (intervention timing, then social interaction),
    /// percentages at two decimals.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("### Intervention timing\n\n");
        out.push_str("| run | ITM % | delta |\n|---|---:|---:|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                r.key,
                pct_opt(r.itm),
                pct_delta(r.delta_itm)
            ));
        }
        out.push_str("\n### Social interaction (macro F1)\n\n");
        out.push_str("| run | SIM % | delta |\n|---|---:|---:|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                r.key,
                pct_opt(r.sim),
                pct_delta(r.delta_sim)
            ));
        }
        out
    }
}
