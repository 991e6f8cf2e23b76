//! Dataset-level statistics: label distribution and cue correlation.

use super::DatasetManifest;
use crate::cue::{Cue, CueMap};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueCount {
    pub count: u64,
    pub rate: f64,
}

/// Positive counts and rates per cue plus the ground truth, and the total
/// question-pair count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub segment_count: u64,
    pub pair_count: u64,
    pub per_cue: CueMap<CueCount>,
    pub ground_truth: CueCount,
}

impl DistributionReport {
    /// One row per variable: `variable,count,rate`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variable", "count", "rate"]).unwrap();
        for (cue, c) in self.per_cue.iter() {
            w.write_record([cue.key(), &c.count.to_string(), &c.rate.to_string()])
                .unwrap();
        }
        w.write_record([
            "ground_truth",
            &self.ground_truth.count.to_string(),
            &self.ground_truth.rate.to_string(),
        ])
        .unwrap();
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

pub fn distribution_report(manifest: &DatasetManifest) -> Result<DistributionReport> {
    let n = manifest.segments.len() as u64;
    if n == 0 {
        return Err(Error::validation("empty manifest"));
    }
    let per_cue = CueMap::from_fn(|cue| {
        let count = manifest
            .segments
            .iter()
            .filter(|s| *s.consensus.get(cue))
            .count() as u64;
        CueCount {
            count,
            rate: count as f64 / n as f64,
        }
    });
    let gt = manifest
        .segments
        .iter()
        .filter(|s| s.ground_truth_interaction)
        .count() as u64;
    Ok(DistributionReport {
        segment_count: n,
        pair_count: manifest.pair_count(),
        per_cue,
        ground_truth: CueCount {
            count: gt,
            rate: gt as f64 / n as f64,
        },
    })
}

/// Symmetric correlation matrix over the eight cues plus the ground truth.
/// Entries are `None` when a variable is constant (undefined correlation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn by_label(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.get(i, j)
    }

    /// CSV with a header row and a label column; undefined entries are `NA`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.labels.clone());
        w.write_record(&header).unwrap();
        for (i, row) in self.values.iter().enumerate() {
            let mut record = vec![self.labels[i].clone()];
            record.extend(row.iter().map(|v| match v {
                Some(x) => x.to_string(),
                None => "NA".to_string(),
            }));
            w.write_record(&record).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Correlation between the 0/1-encoded cue columns and the ground truth,
/// computed from exact co-occurrence counts (the phi coefficient, which
/// equals Pearson on 0/1 data). Constant columns make the whole row and
/// column undefined.
pub fn cue_correlation_matrix(manifest: &DatasetManifest) -> Result<CorrelationMatrix> {
    let n = manifest.segments.len();
    if n < 2 {
        return Err(Error::validation(
            "correlation needs at least two segments",
        ));
    }
    let mut labels: Vec<String> = Cue::ALL.iter().map(|c| c.key().to_string()).collect();
    labels.push("ground_truth".to_string());

    let columns: Vec<Vec<bool>> = (0..9)
        .map(|i| {
            manifest
                .segments
                .iter()
                .map(|s| match Cue::from_index(i) {
                    Some(cue) => *s.consensus.get(cue),
                    None => s.ground_truth_interaction,
                })
                .collect()
        })
        .collect();

    let ones: Vec<i128> = columns
        .iter()
        .map(|col| col.iter().filter(|v| **v).count() as i128)
        .collect();
    let n_i = n as i128;
    let defined: Vec<bool> = ones.iter().map(|&k| k != 0 && k != n_i).collect();

    let mut values = vec![vec![None; 9]; 9];
    for i in 0..9 {
        for j in i..9 {
            if !defined[i] || !defined[j] {
                continue;
            }
            let both = columns[i]
                .iter()
                .zip(&columns[j])
                .filter(|(a, b)| **a && **b)
                .count() as i128;
            let num = n_i * both - ones[i] * ones[j];
            let den = ones[i] * (n_i - ones[i]) * ones[j] * (n_i - ones[j]);
            let r = num as f64 / (den as f64).sqrt();
            values[i][j] = Some(r);
            values[j][i] = Some(r);
        }
    }
    Ok(CorrelationMatrix { labels, values })
}
