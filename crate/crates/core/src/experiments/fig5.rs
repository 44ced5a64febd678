//! Single-queue policy comparison: Weibull services of fixed shape swept over
//! service rates under Poisson arrivals.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{write_csv, write_tsv, RunTag};
use super::ExperimentError;
use crate::accuracy::{
    estimate_policies, unit_batch_prob, AccuracyEstimate, AccuracyOptions, UnitBatch,
};
use crate::queue_sim::QueueSpec;
use crate::seed::derive_seed;
use crate::stochastics::DistributionSpec;

/// One grid point of one panel.
#[derive(Debug, Clone)]
pub struct Fig5Point {
    pub shape: f64,
    pub service_rate: f64,
    pub queue: QueueSpec,
    pub unit_batch: UnitBatch,
    /// In the order of the configured policies.
    pub estimates: Vec<AccuracyEstimate>,
}

impl Fig5Point {
    pub fn estimate(&self, policy: crate::accuracy::Policy) -> Option<&AccuracyEstimate> {
        self.estimates.iter().find(|e| e.policy == policy)
    }

    pub fn scale(&self) -> f64 {
        match self.queue.service {
            DistributionSpec::Weibull { scale, .. } => scale,
            other => 1.0 / other.rate(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig5Result {
    pub points: Vec<Fig5Point>,
}

impl Fig5Result {
    /// Points of one panel, in sweep order.
    pub fn panel(&self, shape: f64) -> Vec<&Fig5Point> {
        self.points.iter().filter(|p| p.shape == shape).collect()
    }
}

/// Queue with Poisson(`lambda`) arrivals and Weibull(`shape`) service of rate `mu`.
pub fn weibull_queue(lambda: f64, shape: f64, mu: f64) -> Result<QueueSpec, ExperimentError> {
    let arrival = DistributionSpec::exponential(lambda)?;
    let service = DistributionSpec::weibull_with_mean(shape, 1.0 / mu)?;
    Ok(QueueSpec::infinite_server(arrival, service)?)
}

/// Runs every (shape, rate) point. All rates of a panel share one seed, so
/// the sweep uses common random numbers.
pub fn run_fig5(cfg: &ExperimentConfig) -> Result<Fig5Result, ExperimentError> {
    let c = &cfg.fig5;
    let opts = AccuracyOptions {
        cap: cfg.cap,
        ..AccuracyOptions::default()
    };
    let grid: Vec<(usize, f64, f64)> = c
        .shapes
        .iter()
        .enumerate()
        .flat_map(|(s, &w)| c.service_rates.iter().map(move |&mu| (s, w, mu)))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(s, shape, mu)| {
            let queue = weibull_queue(c.arrival_rate, shape, mu)?;
            let seed = derive_seed(cfg.seed, &[s as u64]);
            let estimates =
                estimate_policies(&queue, &c.policies, c.transactions, c.runs, seed, &opts)?;
            Ok(Fig5Point {
                shape,
                service_rate: mu,
                queue,
                unit_batch: unit_batch_prob(&queue),
                estimates,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(Fig5Result { points })
}

#[derive(Serialize)]
struct Row<'a> {
    config_hash: &'a str,
    seed: u64,
    shape: f64,
    service_rate: f64,
    scale: f64,
    arrival_rate: f64,
    policy: &'static str,
    estimate: f64,
    stderr: f64,
    periods: usize,
    oversized: usize,
    unit_batch: f64,
    unit_batch_method: &'static str,
}

#[derive(Serialize)]
struct SizeRowOut<'a> {
    config_hash: &'a str,
    seed: u64,
    shape: f64,
    service_rate: f64,
    policy: &'static str,
    size: usize,
    success_rate: f64,
    frequency: f64,
    periods: usize,
}

pub fn write_fig5(
    result: &Fig5Result,
    dir: &Path,
    tag: &RunTag,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut rows = Vec::new();
    let mut size_rows = Vec::new();
    for p in &result.points {
        for e in &p.estimates {
            rows.push(Row {
                config_hash: &tag.config_hash,
                seed: tag.seed,
                shape: p.shape,
                service_rate: p.service_rate,
                scale: p.scale(),
                arrival_rate: p.queue.arrival_rate(),
                policy: e.policy.label(),
                estimate: e.point,
                stderr: e.stderr,
                periods: e.periods,
                oversized: e.oversized,
                unit_batch: p.unit_batch.value,
                unit_batch_method: p.unit_batch.method.label(),
            });
            for s in e.size_rows() {
                size_rows.push(SizeRowOut {
                    config_hash: &tag.config_hash,
                    seed: tag.seed,
                    shape: p.shape,
                    service_rate: p.service_rate,
                    policy: e.policy.label(),
                    size: s.size,
                    success_rate: s.success_rate,
                    frequency: s.frequency,
                    periods: s.periods,
                });
            }
        }
    }
    let mut header: Vec<String> = vec!["shape".into(), "service_rate".into()];
    if let Some(first) = result.points.first() {
        for e in &first.estimates {
            header.push(e.policy.label().into());
            header.push(format!("{}_stderr", e.policy.label()));
        }
    }
    header.push("unit_batch".into());
    let plot: Vec<Vec<String>> = result
        .points
        .iter()
        .map(|p| {
            let mut r = vec![p.shape.to_string(), p.service_rate.to_string()];
            for e in &p.estimates {
                r.push(e.point.to_string());
                r.push(e.stderr.to_string());
            }
            r.push(p.unit_batch.value.to_string());
            r
        })
        .collect();
    Ok(vec![
        write_csv(dir, "fig5.csv", &rows)?,
        write_csv(dir, "fig5_by_size.csv", &size_rows)?,
        write_tsv(dir, "fig5_plot.tsv", &header, &plot)?,
    ])
}
