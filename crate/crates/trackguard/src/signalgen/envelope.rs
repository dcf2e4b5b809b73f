//! Degradation envelopes.
//!
//! An envelope maps progress `t` through a fault's development (0 = onset,
//! 1 = critical failure) to a multiplicative amplitude factor in `[0, 1]`.
//! Progressive envelopes decay smoothly; intermittent envelopes drop
//! individual samples with a probability that grows with `t`; step
//! envelopes switch once at a fixed point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape family of a degradation envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeKind {
    /// Amplitude falls linearly: `1 - severity_max * t`.
    ProgressiveLinear,
    /// Amplitude falls as `1 - severity_max * t^early_flatness`; large
    /// exponents keep the early stage near-nominal.
    ProgressiveExponential,
    /// Individual samples drop to the degraded level with probability
    /// `dropout_max * t`.
    Intermittent,
    /// Full degradation from `step_at` onward, nominal before.
    Step,
}

/// Parameters shared by all envelope kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    /// Amplitude deviation at the critical point, in `(0, 1]`.
    pub severity_max: f64,
    /// Exponent (>= 1) for `ProgressiveExponential`.
    pub early_flatness: f64,
    /// Per-sample dropout probability at `t = 1` for `Intermittent`.
    pub dropout_max: f64,
    /// Switch point in `[0, 1]` for `Step`.
    pub step_at: f64,
}

impl EnvelopeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.severity_max > 0.0 && self.severity_max <= 1.0) {
            return Err(Error::config(format!(
                "severity_max must be in (0, 1], got {}",
                self.severity_max
            )));
        }
        if self.early_flatness < 1.0 {
            return Err(Error::config(format!(
                "early_flatness must be >= 1, got {}",
                self.early_flatness
            )));
        }
        if !(0.0..=1.0).contains(&self.dropout_max) {
            return Err(Error::config(format!(
                "dropout_max must be in [0, 1], got {}",
                self.dropout_max
            )));
        }
        if !(0.0..=1.0).contains(&self.step_at) {
            return Err(Error::config(format!(
                "step_at must be in [0, 1], got {}",
                self.step_at
            )));
        }
        Ok(())
    }
}

/// Returns the amplitude multiplier at progress `t` through the anomaly span.
///
/// Progressive and step envelopes are deterministic and never touch `rng`;
/// the intermittent envelope consumes exactly one draw per call.
pub fn degradation_envelope<R: Rng + ?Sized>(
    kind: EnvelopeKind,
    t: f64,
    params: &EnvelopeParams,
    rng: &mut R,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!(
            "envelope progress t must be in [0, 1], got {t}"
        )));
    }
    params.validate()?;
    let degraded = 1.0 - params.severity_max;
    Ok(match kind {
        EnvelopeKind::ProgressiveLinear => 1.0 - params.severity_max * t,
        EnvelopeKind::ProgressiveExponential => {
            1.0 - params.severity_max * t.powf(params.early_flatness)
        }
        EnvelopeKind::Intermittent => {
            let p = params.dropout_max * t;
            if rng.random::<f64>() < p {
                degraded
            } else {
                1.0
            }
        }
        EnvelopeKind::Step => {
            if t >= params.step_at {
                degraded
            } else {
                1.0
            }
        }
    })
}
