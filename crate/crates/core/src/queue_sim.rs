//! Trace generation for infinite-server and egalitarian processor-sharing
//! queues, and decomposition of a trace into busy periods.
//!
//! A trace records the sorted arrival epochs `Y`, the sorted departure epochs
//! `D` and the ground-truth matching `π` with `D[π[i]] - Y[i]` equal to the
//! time transaction `i` spent in the queue. Indices are 0-based throughout.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::SimRng;
use crate::stochastics::{DistributionSpec, Support};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("load factor must be positive, got {0}")]
    NonPositiveLoad(f64),
    #[error("processor-sharing queue needs load factor < 1 for stability, got {0}")]
    Unstable(f64),
    #[error("transaction count must be at least 1")]
    EmptyRun,
    #[error("arrival and work vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("arrival epochs must be finite and strictly increasing (index {0})")]
    UnsortedArrivals(usize),
    #[error("work of transaction {0} must be finite and nonnegative")]
    BadWork(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    InfiniteServer,
    ProcessorSharing,
}

impl Discipline {
    pub fn label(self) -> &'static str {
        match self {
            Self::InfiniteServer => "infinite-server",
            Self::ProcessorSharing => "processor-sharing",
        }
    }
}

/// Arrival law, service (or job-length) law and discipline of one queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQueueSpec")]
pub struct QueueSpec {
    pub arrival: DistributionSpec,
    pub service: DistributionSpec,
    pub discipline: Discipline,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQueueSpec {
    arrival: DistributionSpec,
    service: DistributionSpec,
    #[serde(default = "default_discipline")]
    discipline: Discipline,
}

fn default_discipline() -> Discipline {
    Discipline::InfiniteServer
}

impl TryFrom<RawQueueSpec> for QueueSpec {
    type Error = QueueError;

    fn try_from(raw: RawQueueSpec) -> Result<Self, Self::Error> {
        QueueSpec::new(raw.arrival, raw.service, raw.discipline)
    }
}

impl QueueSpec {
    pub fn new(
        arrival: DistributionSpec,
        service: DistributionSpec,
        discipline: Discipline,
    ) -> Result<Self, QueueError> {
        let spec = Self {
            arrival,
            service,
            discipline,
        };
        let rho = spec.load_factor();
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(QueueError::NonPositiveLoad(rho));
        }
        if discipline == Discipline::ProcessorSharing && rho >= 1.0 {
            return Err(QueueError::Unstable(rho));
        }
        Ok(spec)
    }

    pub fn infinite_server(
        arrival: DistributionSpec,
        service: DistributionSpec,
    ) -> Result<Self, QueueError> {
        Self::new(arrival, service, Discipline::InfiniteServer)
    }

    pub fn processor_sharing(
        arrival: DistributionSpec,
        job_length: DistributionSpec,
    ) -> Result<Self, QueueError> {
        Self::new(arrival, job_length, Discipline::ProcessorSharing)
    }

    /// ρ = λ/μ = E[T]/E[X].
    pub fn load_factor(&self) -> f64 {
        self.service.mean() / self.arrival.mean()
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival.rate()
    }

    pub fn service_rate(&self) -> f64 {
        self.service.rate()
    }

    /// Support of the time a transaction spends in the queue. For
    /// processor sharing the sojourn is at least the job length and
    /// otherwise unbounded.
    pub fn duration_support(&self) -> Support {
        match self.discipline {
            Discipline::InfiniteServer => self.service.support(),
            Discipline::ProcessorSharing => self.service.support().unbounded_above(),
        }
    }

    /// Simulates `n` transactions drawing from `rng`.
    pub fn simulate(&self, n: usize, rng: &mut SimRng) -> Result<Trace, QueueError> {
        match self.discipline {
            Discipline::InfiniteServer => simulate_infinite_server(self, n, rng),
            Discipline::ProcessorSharing => simulate_processor_sharing(self, n, rng),
        }
    }
}

/// Timestamped trace with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
    /// `true_matching[i]` is the departure rank of arrival `i`.
    pub true_matching: Vec<usize>,
    /// `departures[true_matching[i]] - arrivals[i]`.
    pub durations: Vec<f64>,
    /// Service requirement of each arrival (service time or job length).
    pub work: Vec<f64>,
    /// Epoch of the arrival following the simulated horizon, if known.
    pub next_arrival: Option<f64>,
    pub discipline: Discipline,
    pub unstable_suspected: bool,
}

fn check_inputs(arrivals: &[f64], work: &[f64]) -> Result<(), QueueError> {
    if arrivals.len() != work.len() {
        return Err(QueueError::LengthMismatch(arrivals.len(), work.len()));
    }
    for (i, y) in arrivals.iter().enumerate() {
        if !y.is_finite() || (i > 0 && *y <= arrivals[i - 1]) {
            return Err(QueueError::UnsortedArrivals(i));
        }
    }
    if let Some(i) = work.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(QueueError::BadWork(i));
    }
    Ok(())
}

impl Trace {
    /// Builds an infinite-server trace: transaction `i` leaves at `Y[i] + T[i]`.
    pub fn infinite_server(
        arrivals: Vec<f64>,
        services: Vec<f64>,
        next_arrival: Option<f64>,
    ) -> Result<Self, QueueError> {
        check_inputs(&arrivals, &services)?;
        let exits: Vec<f64> = arrivals.iter().zip(&services).map(|(y, t)| y + t).collect();
        Ok(Self::from_exits(
            arrivals,
            exits,
            services,
            next_arrival,
            Discipline::InfiniteServer,
        ))
    }

    /// Builds a processor-sharing trace by exact event-driven evaluation.
    pub fn processor_sharing(
        arrivals: Vec<f64>,
        jobs: Vec<f64>,
        next_arrival: Option<f64>,
    ) -> Result<Self, QueueError> {
        check_inputs(&arrivals, &jobs)?;
        let exits = processor_sharing_exits(&arrivals, &jobs);
        let mut trace = Self::from_exits(
            arrivals,
            exits,
            jobs,
            next_arrival,
            Discipline::ProcessorSharing,
        );
        trace.unstable_suspected = occupancy_keeps_growing(&trace);
        if trace.unstable_suspected {
            log::warn!(
                "processor-sharing occupancy grows through the whole run; check the load factor"
            );
        }
        Ok(trace)
    }

    fn from_exits(
        arrivals: Vec<f64>,
        exits: Vec<f64>,
        work: Vec<f64>,
        next_arrival: Option<f64>,
        discipline: Discipline,
    ) -> Self {
        let n = arrivals.len();
        let mut order: Vec<usize> = (0..n).collect();
        // ties are broken by arrival index
        order.sort_by(|&a, &b| exits[a].total_cmp(&exits[b]).then(a.cmp(&b)));
        let mut true_matching = vec![0; n];
        for (rank, &i) in order.iter().enumerate() {
            true_matching[i] = rank;
        }
        let departures: Vec<f64> = order.iter().map(|&i| exits[i]).collect();
        let durations = (0..n)
            .map(|i| departures[true_matching[i]] - arrivals[i])
            .collect();
        Self {
            arrivals,
            departures,
            true_matching,
            durations,
            work,
            next_arrival,
            discipline,
            unstable_suspected: false,
        }
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Writes the trace as CSV with one row per transaction.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let periods = busy_periods(self);
        let mut period_of = vec![0usize; self.len()];
        for p in &periods {
            for slot in period_of.iter_mut().skip(p.first).take(p.size()) {
                *slot = p.id;
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "arrival_time",
            "departure_rank",
            "departure_time",
            "duration",
            "busy_period_id",
        ])?;
        for i in 0..self.len() {
            let rank = self.true_matching[i];
            w.write_record(&[
                (i + 1).to_string(),
                format!("{:.12}", self.arrivals[i]),
                (rank + 1).to_string(),
                format!("{:.12}", self.departures[rank]),
                format!("{:.12}", self.durations[i]),
                (period_of[i] + 1).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Departure epoch of each job under egalitarian processor sharing.
///
/// With `k` resident jobs each one attains service at rate `1/k`. Jobs are
/// keyed by the attained-service level at which they finish; the level is
/// reset at the start of every busy period to keep it small.
fn processor_sharing_exits(arrivals: &[f64], jobs: &[f64]) -> Vec<f64> {
    #[derive(PartialEq)]
    struct Key(f64, usize);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> Ordering {
            self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
        }
    }

    let n = arrivals.len();
    let mut exits = vec![f64::NAN; n];
    let mut resident: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    let mut level = 0.0;
    let mut now = 0.0;

    let mut advance_to =
        |horizon: f64, resident: &mut BinaryHeap<Reverse<Key>>, level: &mut f64, now: &mut f64| {
            while let Some(Reverse(Key(target, _))) = resident.peek() {
                let k = resident.len() as f64;
                let exit = *now + (target - *level) * k;
                if exit <= horizon {
                    let Reverse(Key(target, j)) = resident.pop().unwrap();
                    exits[j] = exit;
                    *now = exit;
                    *level = target;
                } else {
                    *level += (horizon - *now) / k;
                    *now = horizon;
                    return;
                }
            }
            *now = horizon;
        };

    for i in 0..n {
        advance_to(arrivals[i], &mut resident, &mut level, &mut now);
        if resident.is_empty() {
            level = 0.0;
        }
        resident.push(Reverse(Key(level + jobs[i], i)));
    }
    advance_to(f64::INFINITY, &mut resident, &mut level, &mut now);
    exits
}

fn occupancy_keeps_growing(trace: &Trace) -> bool {
    let n = trace.len();
    if n < 400 {
        return false;
    }
    // number in system seen by each arrival
    let mut seen = Vec::with_capacity(n);
    let mut d = 0;
    for (i, &y) in trace.arrivals.iter().enumerate() {
        while d < n && trace.departures[d] <= y {
            d += 1;
        }
        seen.push(i - d);
    }
    let q = n / 4;
    let means: Vec<f64> = (0..4)
        .map(|k| seen[k * q..(k + 1) * q].iter().sum::<usize>() as f64 / q as f64)
        .collect();
    means.windows(2).all(|w| w[1] > w[0]) && means[3] > 2.0 * means[0] + 5.0
}

fn renewal_arrivals(spec: &QueueSpec, n: usize, rng: &mut impl Rng) -> (Vec<f64>, f64) {
    let mut t = 0.0;
    let mut arrivals = Vec::with_capacity(n);
    for _ in 0..n {
        t += spec.arrival.sample(rng);
        arrivals.push(t);
    }
    let next = t + spec.arrival.sample(rng);
    (arrivals, next)
}

/// Draws a renewal arrival stream and i.i.d. work for `n` transactions.
fn draw(
    spec: &QueueSpec,
    n: usize,
    rng: &mut SimRng,
) -> Result<(Vec<f64>, Vec<f64>, f64), QueueError> {
    if n == 0 {
        return Err(QueueError::EmptyRun);
    }
    let (arrivals, next) = renewal_arrivals(spec, n, rng);
    let work = (0..n).map(|_| spec.service.sample(rng)).collect();
    Ok((arrivals, work, next))
}

/// Simulates a GI/GI/∞ queue for `n` transactions.
pub fn simulate_infinite_server(
    spec: &QueueSpec,
    n: usize,
    rng: &mut SimRng,
) -> Result<Trace, QueueError> {
    let (arrivals, services, next) = draw(spec, n, rng)?;
    Trace::infinite_server(arrivals, services, Some(next))
}

/// Simulates a GI/GI/1 egalitarian processor-sharing queue for `n` transactions.
pub fn simulate_processor_sharing(
    spec: &QueueSpec,
    n: usize,
    rng: &mut SimRng,
) -> Result<Trace, QueueError> {
    let (arrivals, jobs, next) = draw(spec, n, rng)?;
    Trace::processor_sharing(arrivals, jobs, Some(next))
}

/// One busy period, re-indexed locally.
#[derive(Debug, Clone, PartialEq)]
pub struct BusyPeriod {
    pub id: usize,
    /// Global index of the first arrival (and first departure rank).
    pub first: usize,
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
    pub true_matching: Vec<usize>,
    pub work: Vec<f64>,
    /// Arrival epoch that follows the period, if known.
    pub next_arrival: Option<f64>,
    /// False for the trailing period when the horizon may have cut it short.
    pub complete: bool,
}

impl BusyPeriod {
    pub fn size(&self) -> usize {
        self.arrivals.len()
    }

    pub fn start(&self) -> f64 {
        self.arrivals[0]
    }

    pub fn end(&self) -> f64 {
        *self.departures.last().unwrap()
    }

    /// Whether the true matching is the identity (in-order departures).
    pub fn departs_in_order(&self) -> bool {
        self.true_matching.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Inter-arrival gaps `X(i) = Y(i+1) - Y(i)`, the last one reaching the
    /// next period's first arrival.
    pub fn gaps(&self) -> Option<Vec<f64>> {
        let next = self.next_arrival?;
        let mut gaps: Vec<f64> = self.arrivals.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(next - self.arrivals[self.size() - 1]);
        Some(gaps)
    }

    /// Busy-period event evaluated on the local inter-arrival gaps and
    /// service times of an infinite-server period: the system is occupied
    /// at every arrival after the first, and empty before the next period.
    pub fn occupancy_event_holds(&self) -> Option<bool> {
        let gaps = self.gaps()?;
        let b = self.size();
        let mut busy_until = f64::NEG_INFINITY;
        let mut elapsed = 0.0;
        for i in 0..b {
            busy_until = busy_until.max(elapsed + self.work[i]);
            elapsed += gaps[i];
            let occupied = busy_until > elapsed;
            if occupied != (i + 1 < b) {
                return Some(false);
            }
        }
        Some(true)
    }

    /// The product event `∩_{i<b} {X(i) ≤ T(i) ≤ Σ_{j≥i} X(j)} ∩ {T(b) < X(b)}`.
    ///
    /// It characterises `{B = b}` only on periods whose departures are in
    /// arrival order; when an earlier long job covers a later arrival the
    /// lower bound `X(i) ≤ T(i)` need not hold.
    pub fn ordered_product_event_holds(&self) -> Option<bool> {
        let x = self.gaps()?;
        let t = &self.work;
        let b = self.size();
        let mut tail: f64 = x.iter().sum();
        for i in 0..b - 1 {
            if !(x[i] <= t[i] && t[i] <= tail) {
                return Some(false);
            }
            tail -= x[i];
        }
        Some(t[b - 1] < x[b - 1])
    }

    /// The in-order event `∩_{i<b} {T(i) < X(i) + T(i+1)}`.
    pub fn no_overtaking_event_holds(&self) -> Option<bool> {
        let x = self.gaps()?;
        let t = &self.work;
        Some((0..self.size() - 1).all(|i| t[i] < x[i] + t[i + 1]))
    }
}

/// Splits a trace into busy periods by exact occupancy counting.
///
/// A departure coinciding with an arrival is processed first, unless it
/// belongs to that arrival (a zero-length job).
pub fn busy_periods(trace: &Trace) -> Vec<BusyPeriod> {
    let n = trace.len();
    let mut owner = vec![0usize; n];
    for (i, &j) in trace.true_matching.iter().enumerate() {
        owner[j] = i;
    }
    let mut periods = Vec::new();
    let (mut a, mut d) = (0usize, 0usize);
    let mut occupancy = 0usize;
    let mut start = 0usize;
    while d < n {
        if a < n && occupancy == 0 {
            start = a;
        }
        if a < n && (occupancy == 0 || trace.arrivals[a] < trace.departures[d] || owner[d] >= a) {
            occupancy += 1;
            a += 1;
        } else {
            occupancy -= 1;
            d += 1;
            if occupancy == 0 {
                periods.push(make_period(trace, periods.len(), start, a));
            }
        }
    }
    periods
}

fn make_period(trace: &Trace, id: usize, first: usize, end: usize) -> BusyPeriod {
    let next_arrival = if end < trace.len() {
        Some(trace.arrivals[end])
    } else {
        trace.next_arrival
    };
    let last_departure = trace.departures[end - 1];
    let complete = next_arrival.is_some_and(|t| last_departure <= t);
    BusyPeriod {
        id,
        first,
        arrivals: trace.arrivals[first..end].to_vec(),
        departures: trace.departures[first..end].to_vec(),
        true_matching: trace.true_matching[first..end]
            .iter()
            .map(|&j| j - first)
            .collect(),
        work: trace.work[first..end].to_vec(),
        next_arrival,
        complete,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use proptest::prelude::*;

    fn exp(rate: f64) -> DistributionSpec {
        DistributionSpec::exponential(rate).unwrap()
    }

    #[test]
    fn non_overlapping_pair() {
        let t = Trace::infinite_server(vec![0.0, 10.0], vec![1.0, 1.0], Some(20.0)).unwrap();
        assert_eq!(t.departures, vec![1.0, 11.0]);
        assert_eq!(t.true_matching, vec![0, 1]);
        let bps = busy_periods(&t);
        assert_eq!(bps.len(), 2);
        assert!(bps.iter().all(|b| b.size() == 1 && b.complete));
    }

    #[test]
    fn zero_length_job_inside_a_period() {
        let t = Trace::infinite_server(vec![0.0, 1.0], vec![5.0, 0.0], Some(10.0)).unwrap();
        let bps = busy_periods(&t);
        assert_eq!(bps.len(), 1);
        assert_eq!(bps[0].true_matching, vec![1, 0]);
    }

    #[test]
    fn overtaking_pair() {
        let t = Trace::infinite_server(vec![0.0, 1.0], vec![5.0, 1.0], Some(100.0)).unwrap();
        assert_eq!(t.departures, vec![2.0, 5.0]);
        assert_eq!(t.true_matching, vec![1, 0]);
        let bps = busy_periods(&t);
        assert_eq!(bps.len(), 1);
        assert_eq!(bps[0].size(), 2);
        assert_eq!(bps[0].true_matching, vec![1, 0]);
    }

    #[test]
    fn deterministic_service_keeps_order() {
        let spec =
            QueueSpec::infinite_server(exp(3.0), DistributionSpec::deterministic(2.0).unwrap())
                .unwrap();
        let t = spec.simulate(2000, &mut rng_for(1, &[])).unwrap();
        assert!(t.true_matching.iter().enumerate().all(|(i, &j)| i == j));
    }

    #[test]
    fn empty_trace_has_no_periods() {
        let t = Trace::infinite_server(vec![], vec![], None).unwrap();
        assert!(busy_periods(&t).is_empty());
    }

    #[test]
    fn trailing_period_completeness() {
        let t = Trace::infinite_server(vec![0.0, 1.0], vec![5.0, 1.0], Some(4.0)).unwrap();
        assert!(!busy_periods(&t)[0].complete);
        let t = Trace::infinite_server(vec![0.0, 1.0], vec![5.0, 1.0], None).unwrap();
        assert!(!busy_periods(&t)[0].complete);
    }

    #[test]
    fn processor_sharing_hand_example() {
        let t = Trace::processor_sharing(vec![0.0, 0.5], vec![1.0, 1.0], None).unwrap();
        assert!((t.departures[0] - 1.5).abs() < 1e-12);
        assert!((t.departures[1] - 2.0).abs() < 1e-12);
        assert_eq!(t.true_matching, vec![0, 1]);
    }

    #[test]
    fn processor_sharing_single_job() {
        let t = Trace::processor_sharing(vec![3.0], vec![2.5], None).unwrap();
        assert_eq!(t.durations, vec![2.5]);
    }

    #[test]
    fn processor_sharing_overtaking() {
        // long job first, short job second: the short one leaves first
        let t = Trace::processor_sharing(vec![0.0, 0.1], vec![5.0, 0.2], None).unwrap();
        assert_eq!(t.true_matching, vec![1, 0]);
        // short job shares from 0.1 until it has 0.2 units: 0.4 time units
        assert!((t.departures[0] - 0.5).abs() < 1e-12);
        assert!((t.departures[1] - 5.2).abs() < 1e-12);
    }

    #[test]
    fn load_validation() {
        assert!(matches!(
            QueueSpec::processor_sharing(exp(1.0), exp(0.5)),
            Err(QueueError::Unstable(_))
        ));
        assert!(QueueSpec::infinite_server(exp(1.0), exp(0.5)).is_ok());
        let q = QueueSpec::infinite_server(exp(2.0), exp(4.0)).unwrap();
        assert!((q.load_factor() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            Trace::infinite_server(vec![1.0, 0.5], vec![1.0, 1.0], None),
            Err(QueueError::UnsortedArrivals(1))
        ));
        assert!(matches!(
            Trace::infinite_server(vec![0.0], vec![-1.0], None),
            Err(QueueError::BadWork(0))
        ));
        let q = QueueSpec::infinite_server(exp(1.0), exp(1.0)).unwrap();
        assert!(matches!(
            q.simulate(0, &mut rng_for(0, &[])),
            Err(QueueError::EmptyRun)
        ));
    }

    #[test]
    fn product_event_fails_when_a_long_job_covers_a_gap() {
        // arrivals 0, 1, 2 with services 5, 0.5, 1: one period of three, yet T(2) < X(2)
        let t =
            Trace::infinite_server(vec![0.0, 1.0, 2.0], vec![5.0, 0.5, 1.0], Some(10.0)).unwrap();
        let bps = busy_periods(&t);
        assert_eq!(bps.len(), 1);
        assert_eq!(bps[0].size(), 3);
        assert_eq!(bps[0].occupancy_event_holds(), Some(true));
        assert_eq!(bps[0].ordered_product_event_holds(), Some(false));
    }

    #[test]
    fn csv_export_columns() {
        let t =
            Trace::infinite_server(vec![0.0, 1.0, 10.0], vec![5.0, 1.0, 1.0], Some(20.0)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "index,arrival_time,departure_rank,departure_time,duration,busy_period_id"
        );
        assert!(lines[1].starts_with("1,0.000000000000,2,5.000000000000,5.000000000000,1"));
        assert!(lines[3].ends_with(",2"));
    }

    fn check_trace_invariants(t: &Trace) {
        let n = t.len();
        assert_eq!(t.departures.len(), n);
        let mut seen = vec![false; n];
        for &j in &t.true_matching {
            assert!(!seen[j]);
            seen[j] = true;
        }
        assert!(t.departures.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..n {
            let d = t.departures[t.true_matching[i]] - t.arrivals[i];
            assert_eq!(d, t.durations[i]);
            assert!(d >= 0.0);
            match t.discipline {
                Discipline::InfiniteServer => {
                    assert!((d - t.work[i]).abs() <= 1e-12 * t.arrivals[i].abs().max(1.0))
                }
                Discipline::ProcessorSharing => assert!(d >= t.work[i] - 1e-9),
            }
        }
        let bps = busy_periods(t);
        let mut covered = 0;
        for (k, p) in bps.iter().enumerate() {
            assert_eq!(p.first, covered);
            covered += p.size();
            assert!(p.arrivals[0] < p.departures[0]);
            for (i, &j) in p.true_matching.iter().enumerate() {
                assert_eq!(j + p.first, t.true_matching[p.first + i]);
            }
            if k + 1 < bps.len() {
                assert!(p.end() <= bps[k + 1].start());
            }
        }
        assert_eq!(covered, n);
    }

    #[test]
    fn infinite_server_periods_satisfy_busy_period_events() {
        let specs = [
            QueueSpec::infinite_server(exp(1.0), exp(1.0)).unwrap(),
            QueueSpec::infinite_server(exp(1.0), DistributionSpec::weibull(0.5, 1.0).unwrap())
                .unwrap(),
            QueueSpec::infinite_server(
                DistributionSpec::uniform(0.0, 2.0).unwrap(),
                DistributionSpec::weibull(2.0, 3.0).unwrap(),
            )
            .unwrap(),
        ];
        for (k, s) in specs.iter().enumerate() {
            let t = s.simulate(5000, &mut rng_for(7, &[k as u64])).unwrap();
            check_trace_invariants(&t);
            for p in busy_periods(&t).iter().filter(|p| p.complete) {
                assert_eq!(p.occupancy_event_holds(), Some(true));
                if p.departs_in_order() {
                    assert_eq!(p.ordered_product_event_holds(), Some(true));
                }
            }
        }
    }

    #[test]
    fn processor_sharing_conserves_work() {
        let spec = QueueSpec::processor_sharing(exp(1.0), exp(1.0 / 0.8)).unwrap();
        let t = spec.simulate(20_000, &mut rng_for(11, &[])).unwrap();
        check_trace_invariants(&t);
        assert!(!t.unstable_suspected);
        for p in busy_periods(&t) {
            let work: f64 = p.work.iter().sum();
            let busy = p.end() - p.start();
            assert!(
                (busy - work).abs() <= 1e-9 * busy.max(1.0),
                "{busy} vs {work}"
            );
        }
    }

    #[test]
    fn unstable_arrivals_are_flagged() {
        let arrivals: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        let jobs = vec![1.5; 2000];
        let t = Trace::processor_sharing(arrivals, jobs, None).unwrap();
        assert!(t.unstable_suspected);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_traces_are_consistent(
            gaps in proptest::collection::vec(0.01f64..3.0, 1..60),
            work in proptest::collection::vec(0.0f64..6.0, 60),
            ps in any::<bool>(),
        ) {
            let mut t = 0.0;
            let arrivals: Vec<f64> = gaps.iter().map(|g| { t += g; t }).collect();
            let work = work[..arrivals.len()].to_vec();
            let trace = if ps {
                Trace::processor_sharing(arrivals, work, Some(t + 100.0)).unwrap()
            } else {
                Trace::infinite_server(arrivals, work, Some(t + 100.0)).unwrap()
            };
            check_trace_invariants(&trace);
        }
    }
}
