//! Certificate checks over a roster of queue pairs, with measured accuracies
//! and busy-period order checks for each pair.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, VerifyPair};
use super::output::{write_csv, write_text, RunTag};
use super::ExperimentError;
use crate::accuracy::{
    estimate_accuracy, unit_batch_prob, AccuracyError, AccuracyEstimate, AccuracyOptions,
};
use crate::ordering::{
    busy_period_order_check, certify_heuristic_optimality, confirm, CertificateReport,
    OrderVerdict, PairMeasurement,
};
use crate::queue_sim::QueueSpec;
use crate::seed::derive_seed;

#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub pair: VerifyPair,
    pub report: CertificateReport,
    /// Accuracies of `a` and `b` under the pair's policy, when the policy applies.
    pub estimates: Option<(AccuracyEstimate, AccuracyEstimate)>,
    /// Busy-period sizes of `a` against `b`, then `b` against `a`.
    pub busy_a_over_b: OrderVerdict,
    pub busy_b_over_a: OrderVerdict,
}

#[derive(Debug, Clone)]
pub struct VerifyResult {
    pub pairs: Vec<PairOutcome>,
}

fn verify_pair(
    cfg: &ExperimentConfig,
    index: usize,
    pair: &VerifyPair,
) -> Result<PairOutcome, ExperimentError> {
    let c = &cfg.verify;
    let field = format!("verify.pairs[{index}]");
    let qa: QueueSpec = pair.a.spec(&format!("{field}.a"))?;
    let qb: QueueSpec = pair.b.spec(&format!("{field}.b"))?;
    let opts = AccuracyOptions {
        cap: cfg.cap,
        ..AccuracyOptions::default()
    };
    let mut report =
        certify_heuristic_optimality((&pair.a.id, &qa), (&pair.b.id, &qb), pair.policy);
    let p = index as u64;
    let measure = |q: &QueueSpec, side: u64| {
        estimate_accuracy(
            q,
            pair.policy,
            c.transactions,
            c.runs,
            derive_seed(cfg.seed, &[4, p, side]),
            &opts,
        )
    };
    let estimates = match (measure(&qa, 0), measure(&qb, 1)) {
        (Ok(ea), Ok(eb)) => Some((ea, eb)),
        (Err(AccuracyError::IncompatiblePolicy { reason, .. }), _)
        | (_, Err(AccuracyError::IncompatiblePolicy { reason, .. })) => {
            report
                .notes
                .push(format!("accuracy not measured: {reason}"));
            None
        }
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    if let Some((ea, eb)) = &estimates {
        confirm(&mut report, &qa, &qb, &[PairMeasurement { a: ea, b: eb }]);
    }
    let seed = derive_seed(cfg.seed, &[5, p]);
    let busy_a_over_b = busy_period_order_check(&qa, &qb, c.busy_period_transactions, seed)?;
    let busy_b_over_a = busy_period_order_check(&qb, &qa, c.busy_period_transactions, seed)?;
    Ok(PairOutcome {
        pair: pair.clone(),
        report,
        estimates,
        busy_a_over_b,
        busy_b_over_a,
    })
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyResult, ExperimentError> {
    let pairs = cfg
        .verify
        .pairs
        .par_iter()
        .enumerate()
        .map(|(k, p)| verify_pair(cfg, k, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyResult { pairs })
}

#[derive(Serialize)]
struct CertRow<'a> {
    config_hash: &'a str,
    seed: u64,
    pair: &'a str,
    policy: &'static str,
    certificate: &'static str,
    status: &'static str,
    worse: &'a str,
    better: &'a str,
    row_type: &'static str,
    item: String,
    result: String,
    detail: String,
}

#[derive(Serialize)]
struct MeasureRow<'a> {
    config_hash: &'a str,
    seed: u64,
    pair: &'a str,
    queue_id: &'a str,
    policy: &'static str,
    estimate: f64,
    stderr: f64,
    periods: usize,
    oversized: usize,
    load_factor: f64,
    unit_batch: f64,
}

#[derive(Serialize)]
struct BusyRow<'a> {
    config_hash: &'a str,
    seed: u64,
    pair: &'a str,
    larger: &'a str,
    smaller: &'a str,
    relation: &'static str,
    min_margin: f64,
    max_margin: f64,
    band: f64,
    confidence: f64,
}

fn margins(v: &OrderVerdict) -> (f64, f64, f64) {
    let min = v
        .evidence
        .iter()
        .map(|p| p.margin)
        .fold(f64::INFINITY, f64::min);
    let max = v
        .evidence
        .iter()
        .map(|p| p.margin)
        .fold(f64::NEG_INFINITY, f64::max);
    let band = v.evidence.first().map_or(0.0, |p| p.band);
    (min, max, band)
}

pub fn write_verify(
    result: &VerifyResult,
    dir: &Path,
    tag: &RunTag,
) -> Result<Vec<PathBuf>, ExperimentError> {
    let hash = tag.config_hash.as_str();
    let mut cert_rows = Vec::new();
    let mut measure_rows = Vec::new();
    let mut busy_rows = Vec::new();
    let mut text = String::new();
    for o in &result.pairs {
        let name = o.pair.name.as_str();
        for c in &o.report.certificates {
            let row = |row_type, item, result, detail| CertRow {
                config_hash: hash,
                seed: tag.seed,
                pair: name,
                policy: o.pair.policy.label(),
                certificate: c.kind.label(),
                status: c.status.label(),
                worse: &c.worse,
                better: &c.better,
                row_type,
                item,
                result,
                detail,
            };
            for p in &c.preconditions {
                cert_rows.push(row(
                    "precondition",
                    p.name.clone(),
                    p.check.label().into(),
                    p.detail.clone(),
                ));
            }
            for p in &c.predictions {
                let (result, detail) = match &p.confirmation {
                    Some(k) => (
                        if k.confirmed { "confirmed" } else { "refuted" }.to_string(),
                        format!("difference {} tolerance {}", k.difference, k.tolerance),
                    ),
                    None => ("unmeasured".to_string(), String::new()),
                };
                let item = format!(
                    "{}({}) <= {}({})",
                    p.quantity.label(),
                    p.lower,
                    p.quantity.label(),
                    p.higher
                );
                cert_rows.push(row("prediction", item, result, detail));
            }
        }
        writeln!(text, "== {name}").expect("string write");
        write!(text, "{}", o.report).expect("string write");
        let specs = [
            (&o.pair.a, o.estimates.as_ref().map(|e| &e.0)),
            (&o.pair.b, o.estimates.as_ref().map(|e| &e.1)),
        ];
        for (q, est) in specs {
            let spec = q.spec("verify")?;
            let ub = unit_batch_prob(&spec).value;
            if let Some(e) = est {
                measure_rows.push(MeasureRow {
                    config_hash: hash,
                    seed: tag.seed,
                    pair: name,
                    queue_id: &q.id,
                    policy: e.policy.label(),
                    estimate: e.point,
                    stderr: e.stderr,
                    periods: e.periods,
                    oversized: e.oversized,
                    load_factor: spec.load_factor(),
                    unit_batch: ub,
                });
                writeln!(
                    text,
                    "  measured {}: accuracy {:.4} (se {:.4}), load factor {:.4}, P[B=1] {:.4}",
                    q.id,
                    e.point,
                    e.stderr,
                    spec.load_factor(),
                    ub
                )
                .expect("string write");
            }
        }
        for (larger, smaller, v) in [
            (&o.pair.a.id, &o.pair.b.id, &o.busy_a_over_b),
            (&o.pair.b.id, &o.pair.a.id, &o.busy_b_over_a),
        ] {
            let (min, max, band) = margins(v);
            busy_rows.push(BusyRow {
                config_hash: hash,
                seed: tag.seed,
                pair: name,
                larger,
                smaller,
                relation: v.relation.label(),
                min_margin: min,
                max_margin: max,
                band,
                confidence: v.confidence,
            });
            writeln!(
                text,
                "  busy-period size {larger} >=st {smaller}: {}",
                v.relation.label()
            )
            .expect("string write");
        }
        text.push('\n');
    }
    Ok(vec![
        write_csv(dir, "verify.csv", &cert_rows)?,
        write_csv(dir, "verify_measurements.csv", &measure_rows)?,
        write_csv(dir, "verify_busy_periods.csv", &busy_rows)?,
        write_text(dir, "verify.txt", &text)?,
    ])
}
