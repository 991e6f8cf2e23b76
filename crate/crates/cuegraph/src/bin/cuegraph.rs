//! Command-line front end: generate synthetic datasets, validate manifests,
//! run experiments, sweep ablation grids, and audit stored reports.

use clap::{Parser, Subcommand};
use cuegraph::dataset::{
    check_manifest, cue_correlation_matrix, distribution_report, load_manifest, save_manifest,
};
use cuegraph::detectors::{Mode, PromptVariant};
use cuegraph::graph::GatePolicy;
use cuegraph::harness::{self, load_run_dir, recompute_report, ComponentMask, ExperimentConfig};
use cuegraph::metrics::compare_runs;
use cuegraph::synthgen::{generate, GeneratorConfig};
use cuegraph::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cuegraph", version, about = "Social-interaction cue graph toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset manifest
    Gen {
        /// Generator config JSON
        #[arg(long)]
        config: PathBuf,
        /// Where to write the manifest
        #[arg(long)]
        out: PathBuf,
        /// Override the config's segment count
        #[arg(long)]
        n_segments: Option<usize>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a manifest's invariants; nonzero exit on any violation
    Validate {
        manifest: PathBuf,
        /// Print the label distribution as CSV
        #[arg(long)]
        stats: bool,
        /// Print the cue correlation matrix as CSV
        #[arg(long)]
        correlation: bool,
    },
    /// Run one experiment end to end (resumes if the output dir has records)
    Run {
        /// Experiment config JSON
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        frame_budget: Option<u32>,
        #[arg(long)]
        variant: Option<PromptVariant>,
        #[arg(long)]
        policy: Option<GatePolicy>,
        #[arg(long)]
        mask: Option<ComponentMask>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every cell of an ablation grid over a base config
    Sweep {
        /// Base experiment config JSON
        #[arg(long)]
        config: PathBuf,
        /// Grid JSON listing axis values
        #[arg(long)]
        grid: PathBuf,
    },
    /// Recompute metrics from stored records and audit the stored report
    Report {
        /// Run directory holding records.jsonl and report.json
        #[arg(long)]
        records: PathBuf,
        /// Another run directory to diff against
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn fmt_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    }
}

fn cmd_gen(
    config: &Path,
    out: &Path,
    n_segments: Option<usize>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let mut config = GeneratorConfig::from_json(&read(config)?)?;
    if let Some(n) = n_segments {
        config.n_segments = n;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let manifest = generate(&config)?;
    save_manifest(&manifest, out)?;
    println!("wrote {} segments to {}", manifest.segments.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(manifest: &Path, stats: bool, correlation: bool) -> Result<ExitCode> {
    let loaded = load_manifest(manifest)?;
    let violations = check_manifest(&loaded);
    if stats {
        print!("{}", distribution_report(&loaded)?.to_csv());
    }
    if correlation {
        print!("{}", cue_correlation_matrix(&loaded)?.to_csv());
    }
    if violations.is_empty() {
        println!("ok: {} segments in {}", loaded.segments.len(), loaded.name);
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &violations {
            eprintln!("{v}");
        }
        eprintln!("{} violations", violations.len());
        Ok(ExitCode::FAILURE)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    output_dir: Option<PathBuf>,
    mode: Option<Mode>,
    frame_budget: Option<u32>,
    variant: Option<PromptVariant>,
    policy: Option<GatePolicy>,
    mask: Option<ComponentMask>,
    parallelism: Option<usize>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let mut config = ExperimentConfig::from_json(&read(config)?)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    if let Some(m) = mode {
        config.modality.mode = m;
    }
    if let Some(fb) = frame_budget {
        config.modality.frame_budget = fb;
    }
    if let Some(v) = variant {
        config.variant = v;
    }
    if let Some(p) = policy {
        config.policy = p;
    }
    if let Some(m) = mask {
        config.component_mask = m;
    }
    if let Some(p) = parallelism {
        config.parallelism = p;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let outcome = harness::run(&config)?;
    let report = &outcome.report;
    println!("run: {}", report.metadata.key());
    println!(
        "segments: {} evaluated, {} resumed, {} errored",
        outcome.evaluated, outcome.resumed, report.segment_error_count
    );
    println!("itm: {}", fmt_metric(report.itm));
    println!("sim: {}", fmt_metric(report.sim));
    println!("parse failures: {}", report.parse_failure_count);
    println!("outputs: {}", outcome.output_dir.display());
    if report.partial {
        eprintln!("partial run: failure budget exhausted before all segments finished");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(config: &Path, grid: &Path) -> Result<ExitCode> {
    let base = ExperimentConfig::from_json(&read(config)?)?;
    let grid = harness::SweepGrid::from_json(&read(grid)?)?;
    let outcome = harness::sweep(&base, &grid)?;
    for cell in &outcome.cells {
        match (&cell.report, &cell.error) {
            (Some(r), _) => println!(
                "cell {}: itm={} sim={}",
                cell.name,
                fmt_metric(r.itm),
                fmt_metric(r.sim)
            ),
            (None, Some(e)) => eprintln!("cell {}: FAILED: {e}", cell.name),
            (None, None) => unreachable!(),
        }
    }
    if let Some(table) = &outcome.table {
        print!("{}", table.to_markdown());
    }
    println!(
        "{} of {} cells finished; outputs under {}",
        outcome.succeeded(),
        outcome.cells.len(),
        base.output_dir.display()
    );
    if outcome.succeeded() == 0 {
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(records: &Path, baseline: Option<PathBuf>) -> Result<ExitCode> {
    let report = recompute_report(records)?;
    match baseline {
        None => print!("{}", report.to_json()),
        Some(dir) => {
            let base = load_run_dir(&dir)?;
            let key = base.stored.metadata.key();
            let table = compare_runs(&[base.stored, report], Some(&key))?;
            print!("{}", table.to_markdown());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            config,
            out,
            n_segments,
            seed,
        } => cmd_gen(&config, &out, n_segments, seed),
        Command::Validate {
            manifest,
            stats,
            correlation,
        } => cmd_validate(&manifest, stats, correlation),
        Command::Run {
            config,
            output_dir,
            mode,
            frame_budget,
            variant,
            policy,
            mask,
            parallelism,
            seed,
        } => cmd_run(
            &config,
            output_dir,
            mode,
            frame_budget,
            variant,
            policy,
            mask,
            parallelism,
            seed,
        ),
        Command::Sweep { config, grid } => cmd_sweep(&config, &grid),
        Command::Report { records, baseline } => cmd_report(&records, baseline),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
