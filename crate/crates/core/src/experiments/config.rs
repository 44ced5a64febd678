//! Experiment configuration files.
//!
//! Configs are TOML, or JSON when the file name ends in `.json`. Every field
//! except `kind` has a default; unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accuracy::Policy;
use crate::matching::DEFAULT_CAP;
use crate::queue_sim::{Discipline, QueueSpec};
use crate::stochastics::DistributionSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fig5,
    Fig6,
    VerifyOrder,
    Custom,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
            Self::VerifyOrder => "verify-order",
            Self::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Largest busy period the matching policies are scored on.
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub fig5: Fig5Config,
    #[serde(default)]
    pub fig6: Fig6Config,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub custom: CustomConfig,
}

fn default_seed() -> u64 {
    42
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

/// Single-queue policy comparison over a service-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig5Config {
    /// Weibull shapes, one panel each.
    pub shapes: Vec<f64>,
    /// Poisson arrival rate.
    pub arrival_rate: f64,
    pub service_rates: Vec<f64>,
    pub transactions: usize,
    pub runs: usize,
    pub policies: Vec<Policy>,
}

impl Default for Fig5Config {
    fn default() -> Self {
        Self {
            shapes: vec![1.0, 1.5, 0.5],
            arrival_rate: 1.0,
            service_rates: (1..=10).map(|k| k as f64 * 0.5).collect(),
            transactions: 1000,
            runs: 10,
            policies: Policy::ALL.to_vec(),
        }
    }
}

/// Allocation-strategy comparison over random rosters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig6Config {
    pub budget: usize,
    pub queues: usize,
    pub configs: usize,
    /// Upper ends of the service-rate range `U[rate_low, t_max]`.
    pub t_max: Vec<f64>,
    pub rate_low: f64,
    /// Weibull shapes are drawn from `U[shape_range[0], shape_range[1]]`.
    pub shape_range: [f64; 2],
    pub arrival_rate: f64,
    pub policy: Policy,
    pub transactions: usize,
    pub runs: usize,
}

impl Default for Fig6Config {
    fn default() -> Self {
        Self {
            budget: 2,
            queues: 10,
            configs: 200,
            t_max: vec![1.0, 2.0, 4.0, 8.0],
            rate_low: 0.5,
            shape_range: [0.1, 2.0],
            arrival_rate: 1.0,
            policy: Policy::Fifo,
            transactions: 1000,
            runs: 10,
        }
    }
}

/// A queue with an identifier, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedQueue {
    pub id: String,
    pub arrival: DistributionSpec,
    pub service: DistributionSpec,
    #[serde(default = "default_discipline")]
    pub discipline: Discipline,
}

fn default_discipline() -> Discipline {
    Discipline::InfiniteServer
}

impl NamedQueue {
    pub fn new(
        id: &str,
        arrival: DistributionSpec,
        service: DistributionSpec,
        discipline: Discipline,
    ) -> Self {
        Self {
            id: id.into(),
            arrival,
            service,
            discipline,
        }
    }

    pub fn spec(&self, field: &str) -> Result<QueueSpec, ConfigError> {
        QueueSpec::new(self.arrival, self.service, self.discipline)
            .map_err(|e| invalid(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyPair {
    pub name: String,
    pub policy: Policy,
    pub a: NamedQueue,
    pub b: NamedQueue,
}

/// Certificate checks over a roster of queue pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub transactions: usize,
    pub runs: usize,
    /// Trace length for the busy-period order check of each pair.
    pub busy_period_transactions: usize,
    pub pairs: Vec<VerifyPair>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            transactions: 1000,
            runs: 10,
            busy_period_transactions: 100_000,
            pairs: default_pairs(),
        }
    }
}

fn default_pairs() -> Vec<VerifyPair> {
    use DistributionSpec as D;
    let exp = |r: f64| D::exponential(r).expect("valid");
    let is = Discipline::InfiniteServer;
    let ps = Discipline::ProcessorSharing;
    let pair = |name: &str, policy, a, b| VerifyPair {
        name: name.into(),
        policy,
        a,
        b,
    };
    vec![
        pair(
            "exp-scaled-fifo",
            Policy::Fifo,
            NamedQueue::new("exp-mu1", exp(1.0), exp(1.0), is),
            NamedQueue::new("exp-mu2", exp(1.0), exp(2.0), is),
        ),
        pair(
            "exp-scaled-random",
            Policy::Random,
            NamedQueue::new("exp-mu1", exp(1.0), exp(1.0), is),
            NamedQueue::new("exp-mu2", exp(1.0), exp(2.0), is),
        ),
        pair(
            "det-vs-exp-fifo",
            Policy::Fifo,
            NamedQueue::new("det1", exp(1.0), D::deterministic(1.0).expect("valid"), is),
            NamedQueue::new("exp1", exp(1.0), exp(1.0), is),
        ),
        pair(
            "support-counterexample",
            Policy::Random,
            NamedQueue::new(
                "det1.5",
                exp(0.5),
                D::deterministic(1.5).expect("valid"),
                is,
            ),
            NamedQueue::new(
                "unif0-1",
                exp(0.5),
                D::uniform(0.0, 1.0).expect("valid"),
                is,
            ),
        ),
        pair(
            "ps-scaled-random",
            Policy::Random,
            NamedQueue::new("ps-mean0.8", exp(1.0), exp(1.25), ps),
            NamedQueue::new("ps-mean0.4", exp(1.0), exp(2.5), ps),
        ),
        pair(
            "ps-vs-infinite-random",
            Policy::Random,
            NamedQueue::new("ps-mean0.5", exp(1.0), exp(2.0), ps),
            NamedQueue::new("is-mean0.5", exp(1.0), exp(2.0), is),
        ),
        pair(
            "identical",
            Policy::Fifo,
            NamedQueue::new("copy-a", exp(1.0), exp(1.0), is),
            NamedQueue::new("copy-b", exp(1.0), exp(1.0), is),
        ),
        pair(
            "weibull-common-scale",
            Policy::Fifo,
            NamedQueue::new(
                "weibull-w2",
                exp(1.0),
                D::weibull(2.0, 1.0).expect("valid"),
                is,
            ),
            NamedQueue::new(
                "weibull-w8",
                exp(1.0),
                D::weibull(8.0, 1.0).expect("valid"),
                is,
            ),
        ),
    ]
}

/// Accuracy estimation and allocation for a user-supplied roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomConfig {
    pub budget: usize,
    pub policy: Policy,
    pub transactions: usize,
    pub runs: usize,
    pub queues: Vec<NamedQueue>,
}

impl Default for CustomConfig {
    fn default() -> Self {
        Self {
            budget: 1,
            policy: Policy::Fifo,
            transactions: 1000,
            runs: 10,
            queues: Vec::new(),
        }
    }
}

fn positive(field: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        return Err(invalid(field, "must be at least 1"));
    }
    Ok(())
}

fn positive_real(field: &str, v: f64) -> Result<(), ConfigError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(invalid(
            field,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}

fn increasing_grid(field: &str, grid: &[f64]) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(invalid(field, "grid must not be empty"));
    }
    for (k, &v) in grid.iter().enumerate() {
        positive_real(&format!("{field}[{k}]"), v)?;
    }
    if let Some(k) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(invalid(
            field,
            format!("grid must be strictly increasing (entry {})", k + 1),
        ));
    }
    Ok(())
}

fn unique_ids<'a>(field: &str, ids: impl Iterator<Item = &'a str>) -> Result<(), ConfigError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(invalid(field, "queue ids must not be empty"));
        }
        if !seen.insert(id) {
            return Err(invalid(field, format!("duplicate queue id `{id}`")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            seed: default_seed(),
            cap: default_cap(),
            format: OutputFormat::Csv,
            output_dir: None,
            fig5: Fig5Config::default(),
            fig6: Fig6Config::default(),
            verify: VerifyConfig::default(),
            custom: CustomConfig::default(),
        }
    }

    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json, &path.display().to_string())
    }

    /// Parses config text; `origin` names the source in error messages.
    pub fn parse(text: &str, json: bool, origin: &str) -> Result<Self, ConfigError> {
        let parsed: Result<Self, String> = if json {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        };
        let cfg = parsed.map_err(|message| ConfigError::Parse {
            path: origin.into(),
            message: message.trim_end().into(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the section used by `kind`, plus the global fields.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cap < 2 || self.cap > crate::matching::MAX_DIMENSION {
            return Err(invalid(
                "cap",
                format!(
                    "must lie in 2..={}, got {}",
                    crate::matching::MAX_DIMENSION,
                    self.cap
                ),
            ));
        }
        match self.kind {
            ExperimentKind::Fig5 => {
                let c = &self.fig5;
                if c.shapes.is_empty() {
                    return Err(invalid("fig5.shapes", "at least one shape is required"));
                }
                for (k, &w) in c.shapes.iter().enumerate() {
                    positive_real(&format!("fig5.shapes[{k}]"), w)?;
                }
                positive_real("fig5.arrival_rate", c.arrival_rate)?;
                increasing_grid("fig5.service_rates", &c.service_rates)?;
                positive("fig5.transactions", c.transactions)?;
                positive("fig5.runs", c.runs)?;
                if c.policies.is_empty() {
                    return Err(invalid("fig5.policies", "at least one policy is required"));
                }
                if c.policies.iter().collect::<BTreeSet<_>>().len() != c.policies.len() {
                    return Err(invalid("fig5.policies", "policies must not repeat"));
                }
            }
            ExperimentKind::Fig6 => {
                let c = &self.fig6;
                positive("fig6.queues", c.queues)?;
                positive("fig6.configs", c.configs)?;
                positive("fig6.transactions", c.transactions)?;
                positive("fig6.runs", c.runs)?;
                if c.budget > c.queues {
                    return Err(invalid(
                        "fig6.budget",
                        format!("exceeds the {} queues", c.queues),
                    ));
                }
                positive_real("fig6.rate_low", c.rate_low)?;
                increasing_grid("fig6.t_max", &c.t_max)?;
                if c.t_max[0] < c.rate_low {
                    return Err(invalid(
                        "fig6.t_max",
                        "every entry must be at least rate_low",
                    ));
                }
                let [lo, hi] = c.shape_range;
                positive_real("fig6.shape_range[0]", lo)?;
                positive_real("fig6.shape_range[1]", hi)?;
                if hi < lo {
                    return Err(invalid("fig6.shape_range", "lower end exceeds upper end"));
                }
                positive_real("fig6.arrival_rate", c.arrival_rate)?;
            }
            ExperimentKind::VerifyOrder => {
                let c = &self.verify;
                positive("verify.transactions", c.transactions)?;
                positive("verify.runs", c.runs)?;
                positive(
                    "verify.busy_period_transactions",
                    c.busy_period_transactions,
                )?;
                if c.pairs.is_empty() {
                    return Err(invalid("verify.pairs", "at least one pair is required"));
                }
                unique_ids("verify.pairs", c.pairs.iter().map(|p| p.name.as_str()))?;
                for (k, p) in c.pairs.iter().enumerate() {
                    unique_ids(
                        &format!("verify.pairs[{k}]"),
                        [p.a.id.as_str(), p.b.id.as_str()].into_iter(),
                    )?;
                    p.a.spec(&format!("verify.pairs[{k}].a"))?;
                    p.b.spec(&format!("verify.pairs[{k}].b"))?;
                }
            }
            ExperimentKind::Custom => {
                let c = &self.custom;
                positive("custom.transactions", c.transactions)?;
                positive("custom.runs", c.runs)?;
                if c.queues.is_empty() {
                    return Err(invalid("custom.queues", "at least one queue is required"));
                }
                unique_ids("custom.queues", c.queues.iter().map(|q| q.id.as_str()))?;
                for (k, q) in c.queues.iter().enumerate() {
                    q.spec(&format!("custom.queues[{k}]"))?;
                }
                if c.budget > c.queues.len() {
                    return Err(invalid(
                        "custom.budget",
                        format!("exceeds the {} queues", c.queues.len()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// the output directory left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        params_hash(&c)
    }
}

/// First 16 hex digits of the SHA-256 of the canonical (key-sorted) JSON
/// form of `params`.
pub fn params_hash<T: Serialize>(params: &T) -> String {
    let value = serde_json::to_value(params).expect("parameters serialize");
    let digest = Sha256::digest(value.to_string().as_bytes());
    hex::encode(digest)[..16].to_string()
}
