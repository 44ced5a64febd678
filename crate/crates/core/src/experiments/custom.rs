//! Accuracy estimation and allocation for a roster given in the config.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{write_csv, RunTag};
use super::ExperimentError;
use crate::accuracy::{estimate_accuracy, unit_batch_prob, AccuracyEstimate, AccuracyOptions};
use crate::allocation::{
    allocate, overlap_fraction, AllocationProblem, AllocationResult, Strategy,
};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone)]
pub struct CustomResult {
    pub problem: AllocationProblem,
    /// In [`Strategy::ALL`] order.
    pub allocations: Vec<AllocationResult>,
}

impl CustomResult {
    pub fn estimates(&self) -> &[AccuracyEstimate] {
        self.problem
            .accuracies
            .as_deref()
            .expect("accuracies are estimated")
    }
}

pub fn run_custom(cfg: &ExperimentConfig) -> Result<CustomResult, ExperimentError> {
    let c = &cfg.custom;
    let opts = AccuracyOptions {
        cap: cfg.cap,
        ..AccuracyOptions::default()
    };
    let queues = c
        .queues
        .iter()
        .enumerate()
        .map(|(k, q)| Ok((q.id.clone(), q.spec(&format!("custom.queues[{k}]"))?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let estimates = queues
        .par_iter()
        .enumerate()
        .map(|(k, (_, q))| {
            estimate_accuracy(
                q,
                c.policy,
                c.transactions,
                c.runs,
                derive_seed(cfg.seed, &[k as u64]),
                &opts,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let problem = AllocationProblem::new(queues, c.budget, Some(estimates))?;
    let mut rng = rng_for(cfg.seed, &[u64::MAX]);
    let allocations = Strategy::ALL
        .iter()
        .map(|&s| allocate(&problem, s, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CustomResult {
        problem,
        allocations,
    })
}

#[derive(Serialize)]
struct AccuracyRow<'a> {
    config_hash: &'a str,
    seed: u64,
    queue_id: &'a str,
    policy: &'static str,
    /// `all` for the pooled estimate, otherwise the busy-period size.
    size: String,
    estimate: f64,
    stderr: Option<f64>,
    frequency: f64,
    periods: usize,
    oversized: Option<usize>,
    load_factor: f64,
    unit_batch: f64,
}

#[derive(Serialize)]
struct AllocationRow<'a> {
    config_hash: &'a str,
    seed: u64,
    strategy: &'static str,
    selected_ids: String,
    objective: f64,
    overlap_with_optimal: f64,
    ambiguous: bool,
}

pub fn write_custom(
    result: &CustomResult,
    dir: &Path,
    tag: &RunTag,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let hash = tag.config_hash.as_str();
    let mut acc_rows = Vec::new();
    for ((id, q), e) in result.problem.queues.iter().zip(result.estimates()) {
        let (load_factor, unit_batch) = (q.load_factor(), unit_batch_prob(q).value);
        acc_rows.push(AccuracyRow {
            config_hash: hash,
            seed: tag.seed,
            queue_id: id,
            policy: e.policy.label(),
            size: "all".into(),
            estimate: e.point,
            stderr: Some(e.stderr),
            frequency: 1.0,
            periods: e.periods,
            oversized: Some(e.oversized),
            load_factor,
            unit_batch,
        });
        for s in e.size_rows() {
            acc_rows.push(AccuracyRow {
                config_hash: hash,
                seed: tag.seed,
                queue_id: id,
                policy: e.policy.label(),
                size: s.size.to_string(),
                estimate: s.success_rate,
                stderr: None,
                frequency: s.frequency,
                periods: s.periods,
                oversized: None,
                load_factor,
                unit_batch,
            });
        }
    }
    let optimal = &result.allocations[0];
    let alloc_rows: Vec<AllocationRow> = result
        .allocations
        .iter()
        .map(|r| AllocationRow {
            config_hash: hash,
            seed: tag.seed,
            strategy: r.strategy.label(),
            selected_ids: r
                .selected()
                .iter()
                .map(|&k| result.problem.queues[k].0.as_str())
                .collect::<Vec<_>>()
                .join(";"),
            objective: r.objective.expect("accuracies are estimated"),
            overlap_with_optimal: overlap_fraction(optimal, r),
            ambiguous: r.ambiguous,
        })
        .collect();
    Ok(vec![
        write_csv(dir, "accuracy.csv", &acc_rows)?,
        write_csv(dir, "allocation.csv", &alloc_rows)?,
    ])
}
