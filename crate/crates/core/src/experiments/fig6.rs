//! Allocation-strategy comparison on random rosters of Weibull queues.
//!
//! Each configuration draws per-queue rate positions `u_k ~ U[0, 1]` and
//! shapes `w_k` once; for every `T_max` on the sweep the service rate is
//! `rate_low + u_k (T_max - rate_low)`. Accuracy runs reuse the same seeds
//! across the sweep, so the panels differ only through the rates.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Fig6Config};
use super::output::{write_csv, write_tsv, RunTag};
use super::ExperimentError;
use crate::accuracy::{estimate_accuracy, AccuracyOptions};
use crate::allocation::{
    allocate, overlap_fraction, AllocationProblem, AllocationResult, Strategy,
};
use crate::numeric::mean_var;
use crate::queue_sim::QueueSpec;
use crate::seed::{derive_seed, rng_for};
use crate::stochastics::DistributionSpec;

/// Strategy outcomes of one configuration at one `T_max`, in [`Strategy::ALL`] order.
#[derive(Debug, Clone)]
pub struct Fig6Instance {
    pub t_max: f64,
    pub config: usize,
    pub ids: Vec<String>,
    pub accuracies: Vec<f64>,
    pub results: Vec<AllocationResult>,
}

impl Fig6Instance {
    pub fn result(&self, s: Strategy) -> &AllocationResult {
        self.results
            .iter()
            .find(|r| r.strategy == s)
            .expect("every strategy is run")
    }

    pub fn objective(&self, s: Strategy) -> f64 {
        self.result(s).objective.expect("accuracies are supplied")
    }

    pub fn ratio(&self, s: Strategy) -> f64 {
        self.objective(s) / self.objective(Strategy::Optimal)
    }

    pub fn overlap(&self, s: Strategy) -> f64 {
        overlap_fraction(self.result(Strategy::Optimal), self.result(s))
    }
}

/// Mean and standard error over configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanSe {
    fn of(xs: &[f64]) -> Self {
        let (mean, var) = mean_var(xs);
        Self {
            mean,
            stderr: (var / xs.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub objective: MeanSe,
    pub ratio: MeanSe,
    pub overlap: MeanSe,
}

/// Mean over configurations of `objective(first) - objective(second)`.
#[derive(Debug, Clone)]
pub struct PairedDifference {
    pub first: Strategy,
    pub second: Strategy,
    pub difference: MeanSe,
}

#[derive(Debug, Clone)]
pub struct Fig6Panel {
    pub t_max: f64,
    pub strategies: Vec<StrategySummary>,
    pub paired: Vec<PairedDifference>,
}

impl Fig6Panel {
    pub fn summary(&self, s: Strategy) -> &StrategySummary {
        self.strategies
            .iter()
            .find(|x| x.strategy == s)
            .expect("every strategy is summarized")
    }

    pub fn paired(&self, first: Strategy, second: Strategy) -> &PairedDifference {
        self.paired
            .iter()
            .find(|p| p.first == first && p.second == second)
            .expect("comparison is computed")
    }
}

#[derive(Debug, Clone)]
pub struct Fig6Result {
    pub instances: Vec<Fig6Instance>,
    pub panels: Vec<Fig6Panel>,
}

/// Comparisons reported for every panel.
pub const COMPARISONS: [(Strategy, Strategy); 4] = [
    (Strategy::Optimal, Strategy::UnitBatch),
    (Strategy::UnitBatch, Strategy::LoadFactor),
    (Strategy::LoadFactor, Strategy::Random),
    (Strategy::Optimal, Strategy::Random),
];

/// Rate positions and shapes of configuration `config`.
fn draw_roster(c: &Fig6Config, master: u64, config: usize) -> Vec<(f64, f64)> {
    let mut rng = rng_for(master, &[1, config as u64]);
    let [lo, hi] = c.shape_range;
    (0..c.queues)
        .map(|_| {
            let u: f64 = rng.gen();
            let w = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            (u, w)
        })
        .collect()
}

fn roster_queues(
    c: &Fig6Config,
    draws: &[(f64, f64)],
    t_max: f64,
) -> Result<Vec<QueueSpec>, ExperimentError> {
    let arrival = DistributionSpec::exponential(c.arrival_rate)?;
    draws
        .iter()
        .map(|&(u, w)| {
            let mu = c.rate_low + u * (t_max - c.rate_low);
            let service = DistributionSpec::weibull_with_mean(w, 1.0 / mu)?;
            Ok(QueueSpec::infinite_server(arrival, service)?)
        })
        .collect()
}

fn run_instance(
    cfg: &ExperimentConfig,
    t: usize,
    config: usize,
) -> Result<Fig6Instance, ExperimentError> {
    let c = &cfg.fig6;
    let t_max = c.t_max[t];
    let opts = AccuracyOptions {
        cap: cfg.cap,
        ..AccuracyOptions::default()
    };
    let queues = roster_queues(c, &draw_roster(c, cfg.seed, config), t_max)?;
    let estimates = queues
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let seed = derive_seed(cfg.seed, &[2, config as u64, k as u64]);
            estimate_accuracy(q, c.policy, c.transactions, c.runs, seed, &opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let accuracies = estimates.iter().map(|e| e.point).collect();
    let ids: Vec<String> = (0..queues.len()).map(|k| format!("q{k}")).collect();
    let named = ids.iter().cloned().zip(queues).collect();
    let problem = AllocationProblem::new(named, c.budget, Some(estimates))?;
    let mut rng = rng_for(cfg.seed, &[3, t as u64, config as u64]);
    let results = Strategy::ALL
        .iter()
        .map(|&s| allocate(&problem, s, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fig6Instance {
        t_max,
        config,
        ids,
        accuracies,
        results,
    })
}

fn summarize(t_max: f64, instances: &[&Fig6Instance]) -> Fig6Panel {
    let collect =
        |f: &dyn Fn(&Fig6Instance) -> f64| -> Vec<f64> { instances.iter().map(|i| f(i)).collect() };
    let strategies = Strategy::ALL
        .iter()
        .map(|&s| StrategySummary {
            strategy: s,
            objective: MeanSe::of(&collect(&|i| i.objective(s))),
            ratio: MeanSe::of(&collect(&|i| i.ratio(s))),
            overlap: MeanSe::of(&collect(&|i| i.overlap(s))),
        })
        .collect();
    let paired = COMPARISONS
        .iter()
        .map(|&(first, second)| PairedDifference {
            first,
            second,
            difference: MeanSe::of(&collect(&|i| i.objective(first) - i.objective(second))),
        })
        .collect();
    Fig6Panel {
        t_max,
        strategies,
        paired,
    }
}

pub fn run_fig6(cfg: &ExperimentConfig) -> Result<Fig6Result, ExperimentError> {
    let c = &cfg.fig6;
    let jobs: Vec<(usize, usize)> = (0..c.t_max.len())
        .flat_map(|t| (0..c.configs).map(move |k| (t, k)))
        .collect();
    let instances = jobs
        .par_iter()
        .map(|&(t, k)| run_instance(cfg, t, k))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let panels = c
        .t_max
        .iter()
        .map(|&t_max| {
            let of_panel: Vec<&Fig6Instance> =
                instances.iter().filter(|i| i.t_max == t_max).collect();
            summarize(t_max, &of_panel)
        })
        .collect();
    Ok(Fig6Result { instances, panels })
}

#[derive(Serialize)]
struct ConfigRow<'a> {
    config_hash: &'a str,
    seed: u64,
    t_max: f64,
    config: usize,
    strategy: &'static str,
    objective: f64,
    ratio_to_optimal: f64,
    overlap_with_optimal: f64,
    selected_ids: String,
    ambiguous: bool,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    config_hash: &'a str,
    seed: u64,
    t_max: f64,
    strategy: &'static str,
    mean_objective: f64,
    objective_stderr: f64,
    mean_ratio: f64,
    ratio_stderr: f64,
    mean_overlap: f64,
    overlap_stderr: f64,
}

#[derive(Serialize)]
struct PairedRow<'a> {
    config_hash: &'a str,
    seed: u64,
    t_max: f64,
    first: &'static str,
    second: &'static str,
    mean_difference: f64,
    stderr: f64,
}

pub fn write_fig6(
    result: &Fig6Result,
    dir: &Path,
    tag: &RunTag,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let hash = tag.config_hash.as_str();
    let mut config_rows = Vec::new();
    for i in &result.instances {
        for r in &i.results {
            let selected: Vec<&str> = r.selected().iter().map(|&k| i.ids[k].as_str()).collect();
            config_rows.push(ConfigRow {
                config_hash: hash,
                seed: tag.seed,
                t_max: i.t_max,
                config: i.config,
                strategy: r.strategy.label(),
                objective: i.objective(r.strategy),
                ratio_to_optimal: i.ratio(r.strategy),
                overlap_with_optimal: i.overlap(r.strategy),
                selected_ids: selected.join(";"),
                ambiguous: r.ambiguous,
            });
        }
    }
    let mut summary_rows = Vec::new();
    let mut paired_rows = Vec::new();
    for p in &result.panels {
        for s in &p.strategies {
            summary_rows.push(SummaryRow {
                config_hash: hash,
                seed: tag.seed,
                t_max: p.t_max,
                strategy: s.strategy.label(),
                mean_objective: s.objective.mean,
                objective_stderr: s.objective.stderr,
                mean_ratio: s.ratio.mean,
                ratio_stderr: s.ratio.stderr,
                mean_overlap: s.overlap.mean,
                overlap_stderr: s.overlap.stderr,
            });
        }
        for d in &p.paired {
            paired_rows.push(PairedRow {
                config_hash: hash,
                seed: tag.seed,
                t_max: p.t_max,
                first: d.first.label(),
                second: d.second.label(),
                mean_difference: d.difference.mean,
                stderr: d.difference.stderr,
            });
        }
    }
    let mut header = vec!["t_max".to_string()];
    for s in Strategy::ALL {
        for col in ["objective", "ratio", "overlap"] {
            header.push(format!("{}_{col}", s.label()));
        }
    }
    let plot: Vec<Vec<String>> = result
        .panels
        .iter()
        .map(|p| {
            let mut r = vec![p.t_max.to_string()];
            for s in &p.strategies {
                r.extend([s.objective.mean, s.ratio.mean, s.overlap.mean].map(|v| v.to_string()));
            }
            r
        })
        .collect();
    Ok(vec![
        write_csv(dir, "fig6_configs.csv", &config_rows)?,
        write_csv(dir, "fig6_summary.csv", &summary_rows)?,
        write_csv(dir, "fig6_paired.csv", &paired_rows)?,
        write_tsv(dir, "fig6_plot.tsv", &header, &plot)?,
    ])
}
