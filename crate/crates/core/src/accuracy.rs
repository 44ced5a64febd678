//! Tracking-accuracy estimation.
//!
//! The accuracy of a policy is the probability that it recovers the true
//! matching of a typical busy period. Estimates pool complete busy periods
//! over independent runs; the standard error comes from the between-run
//! spread of the per-run sufficient statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{self, Matching, MatchingError};
use crate::numeric::integrate;
use crate::queue_sim::{busy_periods, BusyPeriod, Discipline, QueueError, QueueSpec};
use crate::seed::{rng_for, SimRng};
use crate::stochastics::{DistributionSpec, SUPPORT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Fifo,
    Random,
    Ml,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Ml, Policy::Fifo, Policy::Random];

    pub fn label(self) -> &'static str {
        match self {
            Policy::Fifo => "fifo",
            Policy::Random => "random",
            Policy::Ml => "ml",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fifo" => Ok(Policy::Fifo),
            "random" => Ok(Policy::Random),
            "ml" => Ok(Policy::Ml),
            other => Err(format!(
                "unknown policy `{other}` (expected fifo, random or ml)"
            )),
        }
    }
}

/// How the random policy is scored on a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomEstimator {
    /// Success probability `1 / perm(A)` of a uniform draw.
    Analytic,
    /// One uniform draw per period, scored 0 or 1.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyOptions {
    /// Periods larger than this count as failures for every policy.
    pub cap: usize,
    pub eps: f64,
    pub random_estimator: RandomEstimator,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        Self {
            cap: matching::DEFAULT_CAP,
            eps: SUPPORT_TOLERANCE,
            random_estimator: RandomEstimator::Analytic,
        }
    }
}

#[derive(Debug, Error)]
pub enum AccuracyError {
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error("policy {policy} cannot be used here: {reason}")]
    IncompatiblePolicy { policy: Policy, reason: String },
    #[error("at least one run is required")]
    NoRuns,
    #[error("no complete busy period was observed; increase the transaction count")]
    NoCompletePeriods,
}

/// Success mass and period count for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub success: f64,
    pub periods: usize,
    pub oversized: usize,
}

/// Success mass and period count for one busy-period size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SizeStats {
    pub success: f64,
    pub periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyEstimate {
    pub policy: Policy,
    pub point: f64,
    pub stderr: f64,
    pub periods: usize,
    pub oversized: usize,
    pub by_size: BTreeMap<usize, SizeStats>,
    pub runs: Vec<RunStats>,
}

/// One row of the per-size view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeRow {
    pub size: usize,
    /// Conditional success estimate given `B = size`.
    pub success_rate: f64,
    /// Empirical `P[B = size]`.
    pub frequency: f64,
    pub periods: usize,
}

impl AccuracyEstimate {
    fn from_parts(
        policy: Policy,
        runs: Vec<RunStats>,
        by_size: BTreeMap<usize, SizeStats>,
    ) -> Result<Self, AccuracyError> {
        let periods: usize = runs.iter().map(|r| r.periods).sum();
        if periods == 0 {
            return Err(AccuracyError::NoCompletePeriods);
        }
        let success: f64 = runs.iter().map(|r| r.success).sum();
        let point = success / periods as f64;
        let stderr = ratio_stderr(&runs, point, periods);
        Ok(Self {
            policy,
            point,
            stderr,
            periods,
            oversized: runs.iter().map(|r| r.oversized).sum(),
            by_size,
            runs,
        })
    }

    pub fn size_rows(&self) -> Vec<SizeRow> {
        self.by_size
            .iter()
            .map(|(&size, s)| SizeRow {
                size,
                success_rate: s.success / s.periods as f64,
                frequency: s.periods as f64 / self.periods as f64,
                periods: s.periods,
            })
            .collect()
    }

    /// Standard error of `self - other` when both were computed on the same runs.
    pub fn paired_difference(&self, other: &Self) -> (f64, f64) {
        assert_eq!(
            self.runs.len(),
            other.runs.len(),
            "paired estimates need the same runs"
        );
        let diffs: Vec<RunStats> = self
            .runs
            .iter()
            .zip(&other.runs)
            .map(|(a, b)| {
                assert_eq!(
                    a.periods, b.periods,
                    "paired estimates need the same periods"
                );
                RunStats {
                    success: a.success - b.success,
                    periods: a.periods,
                    oversized: 0,
                }
            })
            .collect();
        let d = self.point - other.point;
        let se = ratio_stderr(&diffs, d, self.periods);
        (d, se)
    }

    /// `sqrt(se_a^2 + se_b^2)`, conservative for positively correlated estimates.
    pub fn joint_stderr(&self, other: &Self) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Between-run standard error of a pooled ratio `Σ s_r / Σ n_r`.
///
/// With a single run there is no between-run spread; the periods are then
/// treated as independent and the binomial-type bound `p(1-p)/N` is used.
fn ratio_stderr(runs: &[RunStats], point: f64, total: usize) -> f64 {
    let n = total as f64;
    let r = runs.len();
    if r < 2 {
        let p = point.clamp(0.0, 1.0);
        return (p * (1.0 - p) / n).sqrt();
    }
    let ss: f64 = runs
        .iter()
        .map(|run| (run.success - point * run.periods as f64).powi(2))
        .sum();
    (r as f64 / (r as f64 - 1.0) * ss).sqrt() / n
}

enum Outcome {
    Scored(f64),
    Oversized,
}

fn check_policy(q: &QueueSpec, policy: Policy) -> Result<(), AccuracyError> {
    if policy != Policy::Ml {
        return Ok(());
    }
    if q.discipline == Discipline::ProcessorSharing {
        return Err(AccuracyError::IncompatiblePolicy {
            policy,
            reason: "sojourn times under processor sharing have no closed-form density".into(),
        });
    }
    if !q.service.has_density() {
        return Err(AccuracyError::IncompatiblePolicy {
            policy,
            reason: format!("the {} service law has no density", q.service.kind()),
        });
    }
    Ok(())
}

fn score_period(
    bp: &BusyPeriod,
    q: &QueueSpec,
    policy: Policy,
    opts: &AccuracyOptions,
    rng: &mut SimRng,
) -> Result<Outcome, AccuracyError> {
    let b = bp.size();
    if b > opts.cap {
        return Ok(Outcome::Oversized);
    }
    if b == 1 {
        return Ok(Outcome::Scored(1.0));
    }
    let truth = || Matching::new(bp.true_matching.clone());
    let hit =
        |m: Matching| -> Result<f64, AccuracyError> { Ok(if m == truth()? { 1.0 } else { 0.0 }) };
    let score = match policy {
        Policy::Fifo => {
            if fifo_success_indicator(bp) {
                1.0
            } else {
                0.0
            }
        }
        Policy::Random => {
            let support = q.duration_support();
            match opts.random_estimator {
                RandomEstimator::Analytic => {
                    let a = matching::biadjacency(bp, support, opts.eps)?;
                    let count = matching::count_valid_matchings(&a, opts.cap)?;
                    1.0 / count as f64
                }
                RandomEstimator::Sampled => hit(matching::random_match(
                    bp, support, opts.eps, rng, opts.cap,
                )?)?,
            }
        }
        Policy::Ml => hit(matching::ml_match(bp, &q.service, opts.eps, opts.cap)?)?,
    };
    Ok(Outcome::Scored(score))
}

struct RunResult {
    stats: Vec<RunStats>,
    sizes: Vec<BTreeMap<usize, SizeStats>>,
}

fn run_once(
    q: &QueueSpec,
    policies: &[Policy],
    n: usize,
    seed: u64,
    run: u64,
    opts: &AccuracyOptions,
) -> Result<RunResult, AccuracyError> {
    let trace = q.simulate(n, &mut rng_for(seed, &[run]))?;
    // matching draws use their own stream so the trace does not depend on the policy set
    let mut rng = rng_for(seed, &[run, 1]);
    let mut stats = vec![RunStats::default(); policies.len()];
    let mut sizes = vec![BTreeMap::<usize, SizeStats>::new(); policies.len()];
    for bp in busy_periods(&trace).iter().filter(|p| p.complete) {
        for (k, &policy) in policies.iter().enumerate() {
            let score = match score_period(bp, q, policy, opts, &mut rng)? {
                Outcome::Scored(s) => s,
                Outcome::Oversized => {
                    stats[k].oversized += 1;
                    0.0
                }
            };
            stats[k].success += score;
            stats[k].periods += 1;
            let entry = sizes[k].entry(bp.size()).or_default();
            entry.success += score;
            entry.periods += 1;
        }
    }
    Ok(RunResult { stats, sizes })
}

/// Estimates several policies on shared traces, so their differences can be
/// compared with [`AccuracyEstimate::paired_difference`].
pub fn estimate_policies(
    q: &QueueSpec,
    policies: &[Policy],
    n_transactions: usize,
    n_runs: usize,
    seed: u64,
    opts: &AccuracyOptions,
) -> Result<Vec<AccuracyEstimate>, AccuracyError> {
    if n_runs == 0 {
        return Err(AccuracyError::NoRuns);
    }
    for &p in policies {
        check_policy(q, p)?;
    }
    let results: Vec<RunResult> = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| run_once(q, policies, n_transactions, seed, r, opts))
        .collect::<Result<_, _>>()?;
    policies
        .iter()
        .enumerate()
        .map(|(k, &policy)| {
            let runs = results.iter().map(|r| r.stats[k]).collect();
            let mut by_size = BTreeMap::<usize, SizeStats>::new();
            for r in &results {
                for (&b, s) in &r.sizes[k] {
                    let e = by_size.entry(b).or_default();
                    e.success += s.success;
                    e.periods += s.periods;
                }
            }
            AccuracyEstimate::from_parts(policy, runs, by_size)
        })
        .collect()
}

pub fn estimate_accuracy(
    q: &QueueSpec,
    policy: Policy,
    n_transactions: usize,
    n_runs: usize,
    seed: u64,
    opts: &AccuracyOptions,
) -> Result<AccuracyEstimate, AccuracyError> {
    Ok(estimate_policies(q, &[policy], n_transactions, n_runs, seed, opts)?.remove(0))
}

pub fn accuracy_by_size(
    q: &QueueSpec,
    policy: Policy,
    n_transactions: usize,
    n_runs: usize,
    seed: u64,
    opts: &AccuracyOptions,
) -> Result<Vec<SizeRow>, AccuracyError> {
    Ok(estimate_accuracy(q, policy, n_transactions, n_runs, seed, opts)?.size_rows())
}

/// Number of periods on which the ML and in-order matchings coincide, and the
/// number of periods compared. Uses the same traces as [`estimate_policies`]
/// with the same seed; oversized periods are skipped.
pub fn ml_fifo_agreement(
    q: &QueueSpec,
    n_transactions: usize,
    n_runs: usize,
    seed: u64,
    opts: &AccuracyOptions,
) -> Result<(usize, usize), AccuracyError> {
    check_policy(q, Policy::Ml)?;
    let counts: Vec<(usize, usize)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|run| {
            let trace = q.simulate(n_transactions, &mut rng_for(seed, &[run]))?;
            let mut agree = 0;
            let mut total = 0;
            for bp in busy_periods(&trace)
                .iter()
                .filter(|p| p.complete && p.size() <= opts.cap)
            {
                let ml = matching::ml_match(bp, &q.service, opts.eps, opts.cap)?;
                total += 1;
                if ml == matching::fifo_match(bp) {
                    agree += 1;
                }
            }
            Ok((agree, total))
        })
        .collect::<Result<_, AccuracyError>>()?;
    Ok(counts.iter().fold((0, 0), |(a, t), &(x, y)| (a + x, t + y)))
}

/// In-order matching succeeds iff departures leave in arrival order.
pub fn fifo_success_indicator(bp: &BusyPeriod) -> bool {
    bp.departs_in_order()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitBatchMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl UnitBatchMethod {
    pub fn label(self) -> &'static str {
        match self {
            Self::ClosedForm => "closed-form",
            Self::Quadrature => "quadrature",
            Self::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitBatch {
    pub value: f64,
    pub method: UnitBatchMethod,
}

/// `P[B = 1] = P[X > T]`, a busy period holding a single transaction.
///
/// Closed forms cover Poisson arrivals with exponential, deterministic or
/// uniform service, and any pair involving a point mass. Other pairs are
/// integrated numerically as `E_T[P(X > T)]`.
pub fn unit_batch_prob(q: &QueueSpec) -> UnitBatch {
    use DistributionSpec as D;
    let closed = |value| UnitBatch {
        value,
        method: UnitBatchMethod::ClosedForm,
    };
    match (q.arrival, q.service) {
        (x, D::Deterministic { value: m }) => closed(x.ccdf(m)),
        (D::Deterministic { value: x }, t) => closed(t.cdf(x)),
        (D::Exponential { rate: l }, D::Exponential { rate: m }) => closed(m / (l + m)),
        (D::Exponential { rate: l }, D::Weibull { shape, scale }) if shape == 1.0 => {
            closed(1.0 / (1.0 + l * scale))
        }
        (D::Exponential { rate: l }, D::Uniform { low, high }) => {
            closed(((-l * low).exp() - (-l * high).exp()) / (l * (high - low)))
        }
        (x, t) => UnitBatch {
            value: expect_over_service(&t, |s| x.ccdf(s)).clamp(0.0, 1.0),
            method: UnitBatchMethod::Quadrature,
        },
    }
}

/// `E[g(T)]` for a continuous service law, after a change of variables that
/// removes the density singularity of small Weibull shapes.
pub(crate) fn expect_over_service(t: &DistributionSpec, g: impl Fn(f64) -> f64) -> f64 {
    const TOL: f64 = 1e-11;
    match *t {
        DistributionSpec::Exponential { rate } => {
            integrate(|u| (-u).exp() * g(u / rate), 0.0, 60.0, TOL)
        }
        DistributionSpec::Weibull { shape, scale } => integrate(
            |u| (-u).exp() * g(scale * u.powf(1.0 / shape)),
            0.0,
            60.0,
            TOL,
        ),
        DistributionSpec::Uniform { low, high } => integrate(&g, low, high, TOL) / (high - low),
        DistributionSpec::Deterministic { value } => g(value),
    }
}

/// Monte Carlo estimate of `P[X > T]` over `n` independent pairs, with its
/// standard error.
pub fn unit_batch_prob_mc(q: &QueueSpec, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_for(seed, &[]);
    let hits = (0..n)
        .filter(|_| {
            let x = q.arrival.sample(&mut rng);
            let t = q.service.sample(&mut rng);
            x > t
        })
        .count();
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Samples one uniform valid matching per period of a trace; used to check
/// the analytic estimator against direct sampling.
pub fn sampled_random_hits<R: Rng>(
    periods: &[BusyPeriod],
    q: &QueueSpec,
    opts: &AccuracyOptions,
    rng: &mut R,
) -> Result<usize, AccuracyError> {
    let mut hits = 0;
    for bp in periods
        .iter()
        .filter(|p| p.complete && p.size() <= opts.cap)
    {
        let m = matching::random_match(bp, q.duration_support(), opts.eps, rng, opts.cap)?;
        if m.as_slice() == bp.true_matching.as_slice() {
            hits += 1;
        }
    }
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(rate: f64) -> DistributionSpec {
        DistributionSpec::exponential(rate).unwrap()
    }

    fn is(arrival: DistributionSpec, service: DistributionSpec) -> QueueSpec {
        QueueSpec::infinite_server(arrival, service).unwrap()
    }

    fn opts() -> AccuracyOptions {
        AccuracyOptions::default()
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("ml".parse::<Policy>().unwrap(), Policy::Ml);
        assert!("lifo".parse::<Policy>().is_err());
        assert_eq!(Policy::Random.to_string(), "random");
    }

    #[test]
    fn deterministic_service_is_tracked_perfectly() {
        for arrival in [
            exp(1.0),
            exp(0.5),
            DistributionSpec::uniform(0.5, 3.0).unwrap(),
        ] {
            let q = is(arrival, DistributionSpec::deterministic(1.0).unwrap());
            let e = estimate_accuracy(&q, Policy::Fifo, 1000, 5, 3, &opts()).unwrap();
            assert_eq!(e.oversized, 0);
            assert_eq!(e.point, 1.0);
            assert!(e.periods > 0);
        }
    }

    #[test]
    fn light_load_is_nearly_perfect() {
        let cases = [
            is(exp(0.001), exp(1.0)),
            is(
                exp(0.001),
                DistributionSpec::weibull_with_mean(1.5, 1.0).unwrap(),
            ),
        ];
        for q in &cases {
            for e in estimate_policies(q, &Policy::ALL, 1000, 10, 11, &opts()).unwrap() {
                assert!(e.point >= 0.998, "{:?} {}", e.policy, e.point);
            }
        }
    }

    #[test]
    fn mm_policies_agree() {
        let q = is(exp(1.0), exp(1.0));
        let est = estimate_policies(&q, &Policy::ALL, 1000, 10, 21, &opts()).unwrap();
        let (ml, fifo, random) = (&est[0], &est[1], &est[2]);
        assert!((fifo.point - random.point).abs() <= 2.0 * fifo.joint_stderr(random));
        assert_eq!(ml.point, fifo.point);
    }

    #[test]
    fn by_size_view_is_consistent() {
        let q = is(
            exp(1.0),
            DistributionSpec::weibull_with_mean(0.5, 1.5).unwrap(),
        );
        for e in estimate_policies(&q, &Policy::ALL, 1000, 4, 2, &opts()).unwrap() {
            let rows = e.size_rows();
            assert_eq!(rows[0].size, 1);
            assert_eq!(rows[0].success_rate, 1.0);
            let recomposed: f64 = rows.iter().map(|r| r.success_rate * r.frequency).sum();
            assert!((recomposed - e.point).abs() < 1e-12);
            let freq: f64 = rows.iter().map(|r| r.frequency).sum();
            assert!((freq - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ml_rejected_without_density() {
        let q = is(exp(1.0), DistributionSpec::deterministic(1.0).unwrap());
        assert!(matches!(
            estimate_accuracy(&q, Policy::Ml, 100, 1, 0, &opts()),
            Err(AccuracyError::IncompatiblePolicy { .. })
        ));
        let ps = QueueSpec::processor_sharing(exp(1.0), exp(2.0)).unwrap();
        assert!(estimate_accuracy(&ps, Policy::Ml, 100, 1, 0, &opts()).is_err());
        assert!(matches!(
            estimate_accuracy(&q, Policy::Fifo, 100, 0, 0, &opts()),
            Err(AccuracyError::NoRuns)
        ));
    }

    #[test]
    fn oversized_periods_fail_for_every_policy() {
        let q = is(exp(4.0), exp(1.0));
        let tight = AccuracyOptions { cap: 3, ..opts() };
        let est =
            estimate_policies(&q, &[Policy::Fifo, Policy::Random], 500, 2, 4, &tight).unwrap();
        for e in &est {
            assert!(e.oversized > 0);
            let big: f64 = e.by_size.range(4..).map(|(_, s)| s.success).sum();
            assert_eq!(big, 0.0);
        }
        assert_eq!(est[0].oversized, est[1].oversized);
    }

    #[test]
    fn unit_batch_closed_forms() {
        let mm = unit_batch_prob(&is(exp(1.0), exp(1.0)));
        assert_eq!(mm.method, UnitBatchMethod::ClosedForm);
        assert!((mm.value - 0.5).abs() < 1e-15);
        let md = unit_batch_prob(&is(exp(1.0), DistributionSpec::deterministic(1.0).unwrap()));
        assert!((md.value - (-1.0f64).exp()).abs() < 1e-15);
        let mm4 = unit_batch_prob(&is(exp(1.0), exp(4.0)));
        assert!((mm4.value - 0.8).abs() < 1e-15);
        let w1 = unit_batch_prob(&is(exp(1.0), DistributionSpec::weibull(1.0, 0.25).unwrap()));
        assert_eq!(w1.method, UnitBatchMethod::ClosedForm);
        assert!((w1.value - 0.8).abs() < 1e-15);
        let tiny = unit_batch_prob(&is(exp(1e-6), DistributionSpec::uniform(0.0, 2.0).unwrap()));
        assert!(tiny.value > 0.999_99);
    }

    #[test]
    fn unit_batch_matches_monte_carlo() {
        let cases = [
            is(exp(1.0), exp(1.0)),
            is(exp(1.0), DistributionSpec::deterministic(1.0).unwrap()),
            is(exp(1.0), DistributionSpec::uniform(0.5, 2.5).unwrap()),
            is(exp(1.0), DistributionSpec::weibull(0.5, 0.7).unwrap()),
            is(exp(2.0), DistributionSpec::weibull(1.5, 1.0).unwrap()),
            is(
                DistributionSpec::weibull(2.0, 1.0).unwrap(),
                DistributionSpec::uniform(0.0, 2.0).unwrap(),
            ),
            is(DistributionSpec::uniform(0.0, 2.0).unwrap(), exp(1.0)),
            is(DistributionSpec::deterministic(1.0).unwrap(), exp(1.0)),
        ];
        for (k, q) in cases.iter().enumerate() {
            let ub = unit_batch_prob(q);
            let (mc, se) = unit_batch_prob_mc(q, 1_000_000, 100 + k as u64);
            assert!(
                (ub.value - mc).abs() < 4.0 * se + 1e-9,
                "{q:?}: {} vs {mc}",
                ub.value
            );
        }
    }

    #[test]
    fn unit_batch_never_exceeds_accuracy() {
        let queues = [
            is(exp(1.0), exp(0.5)),
            is(exp(1.0), exp(2.0)),
            is(
                exp(1.0),
                DistributionSpec::weibull_with_mean(0.5, 1.0).unwrap(),
            ),
            is(
                exp(1.0),
                DistributionSpec::weibull_with_mean(1.5, 0.5).unwrap(),
            ),
            is(exp(1.0), DistributionSpec::uniform(0.0, 2.0).unwrap()),
        ];
        for (k, q) in queues.iter().enumerate() {
            let ub = unit_batch_prob(q).value;
            for e in estimate_policies(
                q,
                &[Policy::Fifo, Policy::Random],
                1000,
                10,
                k as u64,
                &opts(),
            )
            .unwrap()
            {
                assert!(ub <= e.point + 2.0 * e.stderr, "{q:?} {:?}", e.policy);
            }
        }
    }

    /// Draws `(X1, X2, T1, T2)` directly and keeps the draws where a period
    /// started by an arrival to an empty system holds exactly two
    /// transactions: the second arrives before the first leaves, and both
    /// have left before the third arrival.
    fn two_period_oracle(n: usize, seed: u64) -> (f64, f64) {
        let mut rng = rng_for(seed, &[]);
        let e = exp(1.0);
        let (mut kept, mut ordered) = (0usize, 0usize);
        while kept < n {
            let (x1, x2, t1, t2) = (
                e.sample(&mut rng),
                e.sample(&mut rng),
                e.sample(&mut rng),
                e.sample(&mut rng),
            );
            if t1 > x1 && t1 < x1 + x2 && t2 < x2 {
                kept += 1;
                if t1 < x1 + t2 {
                    ordered += 1;
                }
            }
        }
        let p = ordered as f64 / n as f64;
        (p, (p * (1.0 - p) / n as f64).sqrt())
    }

    #[test]
    fn size_two_success_matches_rejection_oracle() {
        let q = is(exp(1.0), exp(1.0));
        let e = estimate_accuracy(&q, Policy::Fifo, 20_000, 10, 8, &opts()).unwrap();
        let two = e.by_size[&2];
        let p = two.success / two.periods as f64;
        let se = (p * (1.0 - p) / two.periods as f64).sqrt();
        let (oracle, ose) = two_period_oracle(200_000, 9);
        assert!((p - oracle).abs() < 3.0 * se.hypot(ose), "{p} vs {oracle}");
    }

    #[test]
    fn success_decays_with_period_size_under_heavy_load() {
        let q = is(exp(1.0), exp(0.5));
        let e = estimate_accuracy(&q, Policy::Fifo, 20_000, 5, 12, &opts()).unwrap();
        let rows: Vec<SizeRow> = e
            .size_rows()
            .into_iter()
            .filter(|r| r.periods >= 200)
            .collect();
        assert!(rows.len() >= 4);
        for w in rows.windows(2) {
            let se =
                |r: &SizeRow| (r.success_rate * (1.0 - r.success_rate) / r.periods as f64).sqrt();
            assert!(w[1].success_rate <= w[0].success_rate + 2.0 * se(&w[0]).hypot(se(&w[1])));
        }
        assert!(rows.last().unwrap().success_rate < rows[1].success_rate);
    }

    #[test]
    fn analytic_and_sampled_random_agree() {
        let queues = [
            is(exp(1.0), exp(1.0)),
            is(
                exp(1.0),
                DistributionSpec::weibull_with_mean(0.5, 1.0).unwrap(),
            ),
            is(exp(1.0), DistributionSpec::uniform(0.5, 1.5).unwrap()),
            QueueSpec::processor_sharing(exp(1.0), exp(2.0)).unwrap(),
        ];
        for (k, q) in queues.iter().enumerate() {
            let analytic =
                estimate_accuracy(q, Policy::Random, 1000, 10, k as u64, &opts()).unwrap();
            let sampled_opts = AccuracyOptions {
                random_estimator: RandomEstimator::Sampled,
                ..opts()
            };
            let sampled =
                estimate_accuracy(q, Policy::Random, 1000, 10, k as u64, &sampled_opts).unwrap();
            assert_eq!(analytic.periods, sampled.periods);
            assert!(
                (analytic.point - sampled.point).abs() <= 3.0 * analytic.joint_stderr(&sampled),
                "{q:?}"
            );
        }
    }

    #[test]
    fn unit_batch_approaches_accuracy_at_light_load() {
        let service = DistributionSpec::weibull_with_mean(1.5, 1.0).unwrap();
        let mut ratios = Vec::new();
        for (k, lambda) in [0.01, 0.005, 0.001].into_iter().enumerate() {
            let q = is(exp(lambda), service);
            let acc = estimate_accuracy(&q, Policy::Fifo, 1000, 10, k as u64, &opts()).unwrap();
            ratios.push(unit_batch_prob(&q).value / acc.point);
        }
        assert!(ratios.windows(2).all(|w| w[1] >= w[0] - 1e-3), "{ratios:?}");
        assert!(ratios[2] >= 0.99);
    }

    #[test]
    fn fifo_indicator_matches_event_form() {
        let q = is(
            exp(1.0),
            DistributionSpec::weibull_with_mean(0.5, 1.0).unwrap(),
        );
        let t = q.simulate(5000, &mut rng_for(3, &[])).unwrap();
        for bp in busy_periods(&t).iter().filter(|p| p.complete) {
            assert_eq!(
                Some(fifo_success_indicator(bp)),
                bp.no_overtaking_event_holds()
            );
            assert_eq!(bp.occupancy_event_holds(), Some(true));
        }
    }

    #[test]
    fn paired_difference_of_identical_policies_is_zero() {
        let q = is(exp(1.0), exp(1.0));
        let est = estimate_policies(&q, &[Policy::Fifo, Policy::Ml], 1000, 5, 1, &opts()).unwrap();
        let (d, se) = est[0].paired_difference(&est[1]);
        assert_eq!(d, 0.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn ml_is_in_order_for_increasing_hazard() {
        let service = DistributionSpec::weibull_with_mean(1.5, 0.5).unwrap();
        let q = is(exp(1.0), service);
        let (agree, total) = ml_fifo_agreement(&q, 1000, 3, 5, &opts()).unwrap();
        assert!(total > 100);
        assert_eq!(agree, total);
    }
}
