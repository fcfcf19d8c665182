//! Experiment harness: dataset collection, comparison sweeps, ablations,
//! and oracle/evaluation helpers on top of `simudice_core`.

pub mod config;
pub mod inspect;
pub mod results;
pub mod runner;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use simudice_core::algos::Formula;

pub use config::{Algorithm, ExperimentConfig};
pub use results::ResultRow;
pub use runner::{cmd_collect, AblationKind};

use results::{render_summary, summarize, write_csv};
use runner::{ablation_config, ablation_dir, run_sweep};

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub summary: String,
    pub csv_path: PathBuf,
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema: u32,
    config: &'a ExperimentConfig,
    notes: Vec<&'static str>,
}

fn write_sweep(config: &ExperimentConfig, rows: Vec<ResultRow>, dir: &Path) -> Result<SweepOutput> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join("results.csv");
    write_csv(&csv_path, &rows)?;
    let mut notes = vec!["avg_per_step_reward is undiscounted: total reward / total steps over eval_episodes rollouts"];
    if config.algorithms.contains(&Algorithm::SimuDice(Formula::F3)) {
        notes.push("F3 uses 1/K over the K model-known pairs as its uniform term");
    }
    let meta = Metadata { schema: 1, config, notes };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    let summary = render_summary(&summarize(&rows));
    std::fs::write(dir.join("summary.txt"), &summary)?;
    Ok(SweepOutput { rows, summary, csv_path })
}

/// Full cross-product run over datasets under `out/datasets`; writes
/// `out/results.csv` and `out/summary.txt`.
pub fn cmd_compare(config: &ExperimentConfig, out: &Path) -> Result<SweepOutput> {
    let rows = run_sweep(config, out)?;
    write_sweep(config, rows, out)
}

/// Writes into `out/ablate-{which}/`.
pub fn cmd_ablate(config: &ExperimentConfig, which: AblationKind, out: &Path) -> Result<SweepOutput> {
    let c = ablation_config(config, which);
    let rows = run_sweep(&c, out)?;
    write_sweep(&c, rows, &ablation_dir(out, which))
}
