//! Anomaly class catalog.
//!
//! Eleven failure use cases are modeled. Each class specifies which received
//! channel(s) it degrades, the shape of its degradation envelope, and a
//! faint class-specific oscillatory signature — the electrical resonance a
//! particular degrading component imprints on the channel. The signature is
//! zero-mean, so amplitude-threshold monitoring cannot see it, but it is
//! what lets a classifier name the fault long before the amplitude drop
//! becomes significant.
//!
//! The default catalog holds ten classes; class 6 is reserved as a held-out
//! profile for exercising unknown-anomaly detection against a model that
//! never saw it.

use serde::{Deserialize, Serialize};

use super::envelope::EnvelopeKind;
use crate::error::{Error, Result};

/// Which received channel a failure degrades. Upstream faults show on CAT,
/// downstream faults on CAL; shared infrastructure affects both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AffectedChannel {
    /// Upstream-side fault: degrades CAT only.
    Upstream,
    /// Downstream-side fault: degrades CAL only.
    Downstream,
    /// Shared infrastructure: degrades both channels.
    Both,
}

impl AffectedChannel {
    pub fn affects_cat(self) -> bool {
        matches!(self, AffectedChannel::Upstream | AffectedChannel::Both)
    }

    pub fn affects_cal(self) -> bool {
        matches!(self, AffectedChannel::Downstream | AffectedChannel::Both)
    }
}

/// One failure use case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyClass {
    /// Catalog identifier in `1..=11`.
    pub id: u8,
    /// Human-readable failure description.
    pub description: String,
    pub affected_channel: AffectedChannel,
    pub envelope_kind: EnvelopeKind,
    /// Frequency of the class signature ripple, in cycles per sample
    /// (must lie strictly below the Nyquist fraction 0.5).
    pub signature_freq: f64,
}

impl AnomalyClass {
    pub fn validate(&self) -> Result<()> {
        if !(1..=11).contains(&self.id) {
            return Err(Error::config(format!(
                "anomaly class id must be in 1..=11, got {}",
                self.id
            )));
        }
        if !(self.signature_freq > 0.0 && self.signature_freq < 0.5) {
            return Err(Error::config(format!(
                "signature_freq must be in (0, 0.5) cycles/sample, got {}",
                self.signature_freq
            )));
        }
        Ok(())
    }
}

/// Identifier of the class excluded from the default catalog and used as
/// the unknown-anomaly probe.
pub const HELD_OUT_CLASS_ID: u8 = 6;

/// Returns the built-in definition of one anomaly class, or `None` for ids
/// outside `1..=11`.
pub fn anomaly_class(id: u8) -> Option<AnomalyClass> {
    use AffectedChannel::{Both, Downstream, Upstream};
    use EnvelopeKind::{Intermittent, ProgressiveExponential, ProgressiveLinear, Step};

    let (description, affected_channel, envelope_kind) = match id {
        1 => (
            "Decrease of the ballast resistance simulated with a 1-ohm resistance",
            Both,
            ProgressiveExponential,
        ),
        2 => ("Degradation of the LC downstream contact", Downstream, ProgressiveExponential),
        3 => ("Degradation of the LC upstream contact", Upstream, ProgressiveExponential),
        4 => ("Degradation of the track transformer contact", Both, ProgressiveLinear),
        5 => ("Degradation of the wheel-rail contact", Both, ProgressiveLinear),
        6 => (
            "Intermittent degradation of the railway bonding between the remote amplifier (RA) \
             and the sensor",
            Upstream,
            Intermittent,
        ),
        7 => (
            "Progressive degradation of the railway bonding between the remote amplifier (RA) \
             and the receiver",
            Downstream,
            ProgressiveExponential,
        ),
        8 => (
            "Intermittent degradation of the railway bonding between the remote amplifier (RA) \
             and the receiver",
            Downstream,
            Intermittent,
        ),
        9 => (
            "Progressive degradation of the railway bonding between the remote amplifier (RA) \
             and the sensor",
            Upstream,
            ProgressiveLinear,
        ),
        10 => ("Broken rail downstream", Downstream, Step),
        11 => ("Broken rail upstream", Upstream, Step),
        _ => return None,
    };
    Some(AnomalyClass {
        id,
        description: description.to_string(),
        affected_channel,
        envelope_kind,
        signature_freq: default_signature_freq(id),
    })
}

/// Signature ripple frequency for a built-in class, in cycles per sample.
///
/// Trained classes sit on a grid of an integer number of cycles per 64
/// samples (`(id + 4) / 64`), so their signatures are mutually orthogonal
/// over a 64-sample window. The held-out class 6 deliberately sits half-way
/// between the grid points of the two other upstream-channel signatures
/// (classes 9 and 11): its energy leaks into both of their matched filters
/// while its intermittent envelope contradicts either diagnosis, so a
/// classifier trained without it sees conflicting evidence instead of a
/// clean match.
fn default_signature_freq(id: u8) -> f64 {
    if id == HELD_OUT_CLASS_ID {
        13.5 / 64.0
    } else {
        f64::from(id + 4) / 64.0
    }
}

/// The ten classes used for training and evaluation (all but the held-out
/// class 6).
pub fn default_catalog() -> Vec<AnomalyClass> {
    (1..=11)
        .filter(|&id| id != HELD_OUT_CLASS_ID)
        .map(|id| anomaly_class(id).expect("built-in id"))
        .collect()
}

/// All eleven classes, including the held-out class 6.
pub fn full_catalog() -> Vec<AnomalyClass> {
    (1..=11).map(|id| anomaly_class(id).expect("built-in id")).collect()
}

/// The class excluded from the default catalog, used to probe
/// unknown-anomaly detection.
pub fn held_out_class() -> AnomalyClass {
    anomaly_class(HELD_OUT_CLASS_ID).expect("built-in id")
}

/// Checks that every class in a catalog is individually valid and that ids
/// are unique.
pub fn validate_catalog(classes: &[AnomalyClass]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for class in classes {
        class.validate()?;
        if !seen.insert(class.id) {
            return Err(Error::config(format!(
                "duplicate anomaly class id {} in catalog",
                class.id
            )));
        }
    }
    Ok(())
}
