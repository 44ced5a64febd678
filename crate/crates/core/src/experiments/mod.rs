//! Experiment runners: configuration, the policy-comparison and
//! allocation-comparison suites, certificate verification over queue pairs,
//! and custom rosters.
//!
//! All randomness flows from the master seed through [`crate::seed`], and
//! parallel results are collected in index order, so outputs do not depend
//! on the number of worker threads.

pub mod config;
pub mod custom;
pub mod fig5;
pub mod fig6;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use config::{params_hash, ConfigError, ExperimentConfig, ExperimentKind, NamedQueue};
pub use output::RunTag;

use crate::accuracy::AccuracyError;
use crate::allocation::AllocationError;
use crate::queue_sim::QueueError;
use crate::stochastics::DistributionError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Accuracy(#[from] AccuracyError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl ExperimentError {
    /// Whether the error comes from the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: &'a str,
    seed: u64,
    kind: &'static str,
    version: &'static str,
    wall_time_seconds: f64,
    jobs: usize,
    weighting: &'static str,
    random_estimator: &'static str,
    /// Sweep grid of the experiment.
    grid: Vec<f64>,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config_hash: String,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment `cfg` describes on `jobs` worker threads (all cores
/// when `None`) and writes its tables, plot data and manifest into `out`.
pub fn run(
    cfg: &ExperimentConfig,
    out: &Path,
    jobs: Option<usize>,
) -> Result<RunSummary, ExperimentError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?;
    let tag = RunTag {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    let start = Instant::now();
    let mut files = pool.install(|| -> Result<Vec<PathBuf>, ExperimentError> {
        match cfg.kind {
            ExperimentKind::Fig5 => fig5::write_fig5(&fig5::run_fig5(cfg)?, out, &tag),
            ExperimentKind::Fig6 => fig6::write_fig6(&fig6::run_fig6(cfg)?, out, &tag),
            ExperimentKind::VerifyOrder => {
                verify::write_verify(&verify::run_verify(cfg)?, out, &tag)
            }
            ExperimentKind::Custom => custom::write_custom(&custom::run_custom(cfg)?, out, &tag),
        }
    })?;
    let grid = match cfg.kind {
        ExperimentKind::Fig5 => cfg.fig5.service_rates.clone(),
        ExperimentKind::Fig6 => cfg.fig6.t_max.clone(),
        _ => Vec::new(),
    };
    let manifest = Manifest {
        config_hash: &tag.config_hash,
        seed: cfg.seed,
        kind: cfg.kind.label(),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        jobs: pool.current_num_threads(),
        weighting: "period-pooled",
        random_estimator: "analytic",
        grid,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        config: cfg,
    };
    let path = out.join("run_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    files.push(path);
    Ok(RunSummary {
        config_hash: tag.config_hash,
        files,
    })
}
