//! Ablation sweeps: run the cartesian product of axis values over a base
//! config, each cell in its own subdirectory, and emit a comparison table.

use crate::detectors::{Mode, ModalityConfig, PromptVariant};
use crate::error::{Error, Result};
use crate::graph::GatePolicy;
use crate::harness::{runner, ComponentMask, ExperimentConfig};
use crate::metrics::{compare_runs, CompareTable, MetricsReport};
use serde::{Deserialize, Serialize};

pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_MD: &str = "compare.md";
pub const SWEEP_FILE: &str = "sweep.json";

/// Axis values to sweep; absent axes keep the base config's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Vec<Mode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_budget: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Vec<PromptVariant>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<GatePolicy>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_mask: Option<Vec<ComponentMask>>,
}

impl SweepGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: SweepGrid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        fn check_axis<T: PartialEq + std::fmt::Debug>(
            name: &str,
            axis: &Option<Vec<T>>,
        ) -> Result<bool> {
            let Some(values) = axis else { return Ok(false) };
            if values.is_empty() {
                return Err(Error::validation(format!("grid axis {name} is empty")));
            }
            for (i, v) in values.iter().enumerate() {
                if values[..i].contains(v) {
                    return Err(Error::validation(format!(
                        "grid axis {name} repeats {v:?}"
                    )));
                }
            }
            Ok(true)
        }
        let mut any = false;
        any |= check_axis("mode", &self.mode)?;
        any |= check_axis("frame_budget", &self.frame_budget)?;
        any |= check_axis("variant", &self.variant)?;
        any |= check_axis("policy", &self.policy)?;
        any |= check_axis("component_mask", &self.component_mask)?;
        if !any {
            return Err(Error::validation("sweep grid has no axes"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        fn len<T>(axis: &Option<Vec<T>>) -> usize {
            axis.as_ref().map_or(1, Vec::len)
        }
        len(&self.mode)
            * len(&self.frame_budget)
            * len(&self.variant)
            * len(&self.policy)
            * len(&self.component_mask)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellResult {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct SweepOutcome {
    pub cells: Vec<CellResult>,
    pub table: Option<CompareTable>,
}

impl SweepOutcome {
    pub fn succeeded(&self) -> usize {
        self.cells.iter().filter(|c| c.report.is_some()).count()
    }

    pub fn failed(&self) -> usize {
        self.cells.len() - self.succeeded()
    }
}

fn axis<T: Copy>(values: &Option<Vec<T>>, base: T) -> Vec<T> {
    values.clone().unwrap_or_else(|| vec![base])
}

/// Run every cell of the grid. Cell failures are recorded and the sweep
/// continues; the comparison table covers the cells that finished.
pub fn sweep(base: &ExperimentConfig, grid: &SweepGrid) -> Result<SweepOutcome> {
    grid.validate()?;
    std::fs::create_dir_all(&base.output_dir).map_err(|e| Error::io(&base.output_dir, e))?;
    let mut cells = Vec::new();
    for mode in axis(&grid.mode, base.modality.mode) {
        for frame_budget in axis(&grid.frame_budget, base.modality.frame_budget) {
            for variant in axis(&grid.variant, base.variant) {
                for policy in axis(&grid.policy, base.policy) {
                    for component_mask in axis(&grid.component_mask, base.component_mask) {
                        let name =
                            format!("{mode}_f{frame_budget}_{variant}_{policy}_{component_mask}");
                        let mut config = base.clone();
                        config.modality = ModalityConfig { mode, frame_budget };
                        config.variant = variant;
                        config.policy = policy;
                        config.component_mask = component_mask;
                        config.output_dir = base.output_dir.join(&name);
                        let cell = match runner::run(&config) {
                            Ok(out) => CellResult {
                                name,
                                report: Some(out.report),
                                error: None,
                            },
                            Err(e) => CellResult {
                                name,
                                report: None,
                                error: Some(e.to_string()),
                            },
                        };
                        cells.push(cell);
                    }
                }
            }
        }
    }

    let finished: Vec<MetricsReport> = cells
        .iter()
        .filter_map(|c| c.report.clone())
        .collect();
    let table = if finished.is_empty() {
        None
    } else {
        let table = compare_runs(&finished, None)?;
        let csv_path = base.output_dir.join(COMPARE_CSV);
        std::fs::write(&csv_path, table.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
        let md_path = base.output_dir.join(COMPARE_MD);
        std::fs::write(&md_path, table.to_markdown()).map_err(|e| Error::io(&md_path, e))?;
        Some(table)
    };

    let sweep_path = base.output_dir.join(SWEEP_FILE);
    let mut summary = serde_json::to_string_pretty(&cells)?;
    summary.push('\n');
    std::fs::write(&sweep_path, summary).map_err(|e| Error::io(&sweep_path, e))?;

    Ok(SweepOutcome { cells, table })
}
