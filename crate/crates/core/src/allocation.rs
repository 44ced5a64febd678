//! Budgeted instrumentation.
//!
//! Instrumented queues are tracked perfectly; the others contribute their
//! timestamp-matching accuracy. With a budget of `E` queues the objective
//! `Σ z_k + (1 - z_k) P(k)` is maximized by instrumenting the `E` queues of
//! lowest accuracy. The heuristics replace the accuracy by a cheap score.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::accuracy::{unit_batch_prob, AccuracyEstimate};
use crate::queue_sim::QueueSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("budget {budget} exceeds the number of queues {queues}")]
    BudgetTooLarge { budget: usize, queues: usize },
    #[error("the optimal strategy needs one accuracy estimate per queue")]
    MissingAccuracies,
    #[error("{got} accuracy estimates for {expected} queues")]
    AccuracyCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Optimal,
    LoadFactor,
    UnitBatch,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Optimal,
        Strategy::UnitBatch,
        Strategy::LoadFactor,
        Strategy::Random,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::Optimal => "optimal",
            Strategy::LoadFactor => "load-factor",
            Strategy::UnitBatch => "unit-batch",
            Strategy::Random => "random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AllocationProblem {
    pub queues: Vec<(String, QueueSpec)>,
    pub budget: usize,
    pub accuracies: Option<Vec<AccuracyEstimate>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    pub strategy: Strategy,
    pub z: Vec<bool>,
    /// Objective under the supplied accuracies, if any.
    pub objective: Option<f64>,
    /// Per-queue score the strategy ranked on; lower means instrument first.
    pub scores: Vec<f64>,
    /// Set when the last selected and first unselected queue have accuracies
    /// closer than one joint standard error.
    pub ambiguous: bool,
}

impl AllocationResult {
    pub fn selected(&self) -> Vec<usize> {
        self.z
            .iter()
            .enumerate()
            .filter(|(_, &z)| z)
            .map(|(k, _)| k)
            .collect()
    }
}

impl AllocationProblem {
    pub fn new(
        queues: Vec<(String, QueueSpec)>,
        budget: usize,
        accuracies: Option<Vec<AccuracyEstimate>>,
    ) -> Result<Self, AllocationError> {
        if budget > queues.len() {
            return Err(AllocationError::BudgetTooLarge {
                budget,
                queues: queues.len(),
            });
        }
        if let Some(acc) = &accuracies {
            if acc.len() != queues.len() {
                return Err(AllocationError::AccuracyCount {
                    expected: queues.len(),
                    got: acc.len(),
                });
            }
        }
        Ok(Self {
            queues,
            budget,
            accuracies,
        })
    }

    fn points(&self) -> Option<Vec<f64>> {
        self.accuracies
            .as_ref()
            .map(|a| a.iter().map(|e| e.point).collect())
    }

    fn finish(&self, strategy: Strategy, order: &[usize], scores: Vec<f64>) -> AllocationResult {
        let mut z = vec![false; self.queues.len()];
        for &k in &order[..self.budget] {
            z[k] = true;
        }
        let objective = self.points().map(|p| objective(&z, &p));
        let ambiguous = match &self.accuracies {
            Some(acc) if self.budget > 0 && self.budget < order.len() => {
                let (a, b) = (&acc[order[self.budget - 1]], &acc[order[self.budget]]);
                (a.point - b.point).abs() < a.joint_stderr(b)
            }
            _ => false,
        };
        AllocationResult {
            strategy,
            z,
            objective,
            scores,
            ambiguous,
        }
    }
}

/// Indices sorted by ascending score, ties by lowest index.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

/// `Σ z_k + (1 - z_k) P(k)`.
pub fn objective(z: &[bool], accuracies: &[f64]) -> f64 {
    z.iter()
        .zip(accuracies)
        .map(|(&z, &p)| if z { 1.0 } else { p })
        .sum()
}

/// Instruments the `E` queues of lowest estimated accuracy.
pub fn optimal_allocation(p: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    let scores = p.points().ok_or(AllocationError::MissingAccuracies)?;
    Ok(p.finish(Strategy::Optimal, &ascending(&scores), scores))
}

/// Instruments the `E` queues of highest load factor.
pub fn load_factor_allocation(p: &AllocationProblem) -> AllocationResult {
    let loads: Vec<f64> = p.queues.iter().map(|(_, q)| q.load_factor()).collect();
    let neg: Vec<f64> = loads.iter().map(|r| -r).collect();
    p.finish(Strategy::LoadFactor, &ascending(&neg), loads)
}

/// Instruments the `E` queues of lowest `P[B = 1]`.
pub fn unit_batch_allocation(p: &AllocationProblem) -> AllocationResult {
    let scores: Vec<f64> = p
        .queues
        .iter()
        .map(|(_, q)| unit_batch_prob(q).value)
        .collect();
    p.finish(Strategy::UnitBatch, &ascending(&scores), scores)
}

/// Instruments a uniformly drawn `E`-subset.
pub fn random_allocation<R: Rng + ?Sized>(p: &AllocationProblem, rng: &mut R) -> AllocationResult {
    let n = p.queues.len();
    let mut order = sample(rng, n, p.budget).into_vec();
    order.sort_unstable();
    let chosen: BTreeSet<usize> = order.iter().copied().collect();
    order.extend((0..n).filter(|k| !chosen.contains(k)));
    let scores = (0..n)
        .map(|k| if chosen.contains(&k) { 0.0 } else { 1.0 })
        .collect();
    let mut r = p.finish(Strategy::Random, &order, scores);
    r.ambiguous = false;
    r
}

/// Dispatches on `strategy`; `rng` is used by the random strategy only.
pub fn allocate<R: Rng + ?Sized>(
    p: &AllocationProblem,
    strategy: Strategy,
    rng: &mut R,
) -> Result<AllocationResult, AllocationError> {
    Ok(match strategy {
        Strategy::Optimal => optimal_allocation(p)?,
        Strategy::LoadFactor => load_factor_allocation(p),
        Strategy::UnitBatch => unit_batch_allocation(p),
        Strategy::Random => random_allocation(p, rng),
    })
}

/// `|selected(a) ∩ selected(b)| / E`; 1 when nothing is selected.
pub fn overlap_fraction(a: &AllocationResult, b: &AllocationResult) -> f64 {
    let e = a.z.iter().filter(|&&z| z).count();
    if e == 0 {
        return 1.0;
    }
    let common = a.z.iter().zip(&b.z).filter(|(&x, &y)| x && y).count();
    common as f64 / e as f64
}
