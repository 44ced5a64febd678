//! Parametric laws for inter-arrival times, service times and job lengths.
//!
//! Every law in the catalog has a closed-form ccdf and mean, which is what the
//! rest of the crate relies on: validity tests only need support bounds,
//! the unit-batch score needs `P[X > T]`, and the ordering checks compare
//! ccdfs on a grid.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

/// Absolute tolerance used for every support-membership test.
pub const SUPPORT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid {kind} parameters: {reason}")]
    InvalidParameters { kind: &'static str, reason: String },
    #[error("the {0} law has no density; use support membership instead")]
    DensityUndefined(&'static str),
}

/// Closed interval `[lower, upper]` carrying the law's mass; `upper` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper);
        Self { lower, upper }
    }

    /// Membership with the tolerance widening both ends.
    pub fn contains(&self, x: f64, eps: f64) -> bool {
        x >= self.lower - eps && x <= self.upper + eps
    }

    /// Drops the upper bound. Sojourn times in a processor-sharing queue are
    /// bounded below by the job length but not above.
    pub fn unbounded_above(self) -> Self {
        Self {
            lower: self.lower,
            upper: f64::INFINITY,
        }
    }
}

/// Parametric description of a nonnegative law.
///
/// Serialized as a tagged literal, e.g. `{"kind":"weibull","shape":1.5,"scale":1.0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "RawDistribution")]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Uniform { low: f64, high: f64 },
    Deterministic { value: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawDistribution {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Uniform { low: f64, high: f64 },
    Deterministic { value: f64 },
}

impl TryFrom<RawDistribution> for DistributionSpec {
    type Error = DistributionError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        match raw {
            RawDistribution::Exponential { rate } => Self::exponential(rate),
            RawDistribution::Weibull { shape, scale } => Self::weibull(shape, scale),
            RawDistribution::Uniform { low, high } => Self::uniform(low, high),
            RawDistribution::Deterministic { value } => Self::deterministic(value),
        }
    }
}

fn positive_finite(kind: &'static str, name: &str, v: f64) -> Result<(), DistributionError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DistributionError::InvalidParameters {
            kind,
            reason: format!("{name} must be positive and finite, got {v}"),
        })
    }
}

/// Family tag used to detect linear scalings. Exponential is Weibull with shape 1.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Weibull(f64),
    Uniform(f64),
    Deterministic,
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self, DistributionError> {
        positive_finite("exponential", "rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self, DistributionError> {
        positive_finite("weibull", "shape", shape)?;
        positive_finite("weibull", "scale", scale)?;
        let spec = Self::Weibull { shape, scale };
        // very small shapes overflow Γ(1 + 1/w)
        positive_finite("weibull", "mean", spec.mean())?;
        Ok(spec)
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self, DistributionError> {
        if !(low.is_finite() && high.is_finite() && low >= 0.0 && high > low) {
            return Err(DistributionError::InvalidParameters {
                kind: "uniform",
                reason: format!("need 0 <= low < high < inf, got ({low}, {high})"),
            });
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn deterministic(value: f64) -> Result<Self, DistributionError> {
        positive_finite("deterministic", "value", value)?;
        Ok(Self::Deterministic { value })
    }

    /// Weibull with the given shape whose mean is `mean`.
    pub fn weibull_with_mean(shape: f64, mean: f64) -> Result<Self, DistributionError> {
        positive_finite("weibull", "shape", shape)?;
        positive_finite("weibull", "mean", mean)?;
        Self::weibull(shape, mean / gamma(1.0 + 1.0 / shape))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Weibull { .. } => "weibull",
            Self::Uniform { .. } => "uniform",
            Self::Deterministic { .. } => "deterministic",
        }
    }

    pub fn support(&self) -> Support {
        match *self {
            Self::Exponential { .. } | Self::Weibull { .. } => Support::new(0.0, f64::INFINITY),
            Self::Uniform { low, high } => Support::new(low, high),
            Self::Deterministic { value } => Support::new(value, value),
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, Self::Deterministic { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => -(1.0 - rng.gen::<f64>()).ln() / rate,
            Self::Weibull { shape, scale } => {
                scale * (-(1.0 - rng.gen::<f64>()).ln()).powf(1.0 / shape)
            }
            Self::Uniform { low, high } => low + (high - low) * rng.gen::<f64>(),
            Self::Deterministic { value } => value,
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64, DistributionError> {
        let ln = self.ln_pdf(x)?;
        Ok(ln.exp())
    }

    /// Log-density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> Result<f64, DistributionError> {
        Ok(match *self {
            Self::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Self::Weibull { shape, scale } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => -scale.ln(),
                        _ => f64::NEG_INFINITY,
                    }
                } else {
                    let z = x / scale;
                    (shape / scale).ln() + (shape - 1.0) * z.ln() - z.powf(shape)
                }
            }
            Self::Uniform { low, high } => {
                if x < low || x > high {
                    f64::NEG_INFINITY
                } else {
                    -(high - low).ln()
                }
            }
            Self::Deterministic { .. } => {
                return Err(DistributionError::DensityUndefined("deterministic"))
            }
        })
    }

    /// `P[Z > x]`.
    pub fn ccdf(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Self::Weibull { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x / scale).powf(shape)).exp()
                }
            }
            Self::Uniform { low, high } => {
                if x <= low {
                    1.0
                } else if x >= high {
                    0.0
                } else {
                    (high - x) / (high - low)
                }
            }
            Self::Deterministic { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.ccdf(x)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Deterministic { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Weibull { shape, scale } => {
                let g1 = gamma(1.0 + 1.0 / shape);
                let g2 = gamma(1.0 + 2.0 / shape);
                scale * scale * (g2 - g1 * g1)
            }
            Self::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Self::Deterministic { .. } => 0.0,
        }
    }

    /// Reciprocal mean (arrival rate λ or service rate μ).
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// The law of `factor * Z`.
    pub fn scaled(&self, factor: f64) -> Result<Self, DistributionError> {
        positive_finite(self.kind(), "scale factor", factor)?;
        match *self {
            Self::Exponential { rate } => Self::exponential(rate / factor),
            Self::Weibull { shape, scale } => Self::weibull(shape, scale * factor),
            Self::Uniform { low, high } => Self::uniform(low * factor, high * factor),
            Self::Deterministic { value } => Self::deterministic(value * factor),
        }
    }

    fn family(&self) -> Family {
        match *self {
            Self::Exponential { .. } => Family::Weibull(1.0),
            Self::Weibull { shape, .. } => Family::Weibull(shape),
            Self::Uniform { low, high } => Family::Uniform(low / high),
            Self::Deterministic { .. } => Family::Deterministic,
        }
    }

    /// If `other` has the law of `s * self` for some `s > 0`, returns `s`.
    pub fn scaling_to(&self, other: &Self) -> Option<f64> {
        let same = match (self.family(), other.family()) {
            (Family::Weibull(a), Family::Weibull(b)) => approx_eq(a, b),
            (Family::Uniform(a), Family::Uniform(b)) => approx_eq(a, b),
            (Family::Deterministic, Family::Deterministic) => true,
            _ => false,
        };
        same.then(|| other.mean() / self.mean())
    }

    /// Points where the ccdf jumps or the support ends, for grid construction.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Uniform { low, high } => vec![low, high],
            Self::Deterministic { value } => vec![value],
            _ => vec![0.0],
        }
    }

    /// Upper `1 - p` quantile, finite for every law in the catalog.
    pub fn upper_quantile(&self, p: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => -p.ln() / rate,
            Self::Weibull { shape, scale } => scale * (-p.ln()).powf(1.0 / shape),
            Self::Uniform { low, high } => high - p * (high - low),
            Self::Deterministic { value } => value,
        }
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}
