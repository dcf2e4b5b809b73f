//! Synthetic two-channel experiment generator.
//!
//! Each experiment is a pair of received-signal amplitude traces (CAT and
//! CAL, sampled at `sample_rate` after demodulating the kHz carrier) with a
//! nominal lead, an anomaly development span, and a nominal tail. A sample
//! of an affected channel during the anomaly span is
//!
//! ```text
//! value = nominal_amplitude * envelope(t) + ripple(i) + noise
//! ```
//!
//! where `t` is progress through the span, `envelope` is the class's
//! degradation shape, `ripple` is the faint zero-mean class signature tone
//! (ramped in just after onset), and `noise` is i.i.d. Gaussian with
//! `noise_sigma` applied to every sample of both channels throughout.
//! Unaffected channels carry nominal amplitude plus noise for the whole
//! record.
//!
//! Generation is deterministic for a fixed `(class, config, seed)`: the RNG
//! draw order is frozen as (CAT ripple phase, CAL ripple phase, then per
//! sample: intermittent-dropout draw when applicable, CAT noise, CAL
//! noise).

pub mod catalog;
pub mod csv;
pub mod envelope;

pub use catalog::{
    anomaly_class, default_catalog, full_catalog, held_out_class, AffectedChannel, AnomalyClass,
    HELD_OUT_CLASS_ID,
};

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use envelope::{degradation_envelope, EnvelopeParams};

/// Class label of a record or window: healthy, or one of the anomaly
/// classes by catalog id.
///
/// The derived ordering (`Nominal` first, then ids ascending) is the
/// canonical class ordering used for classifier outputs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Label {
    Nominal,
    Anomaly(u8),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Nominal => write!(f, "Nominal"),
            Label::Anomaly(id) => write!(f, "Anomaly{id}"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "Nominal" {
            return Ok(Label::Nominal);
        }
        if let Some(rest) = s.strip_prefix("Anomaly") {
            let id: u8 = rest
                .parse()
                .map_err(|_| Error::domain(format!("invalid label {s:?}")))?;
            if (1..=11).contains(&id) {
                return Ok(Label::Anomaly(id));
            }
        }
        Err(Error::domain(format!(
            "invalid label {s:?} (expected \"Nominal\" or \"Anomaly1\"..=\"Anomaly11\")"
        )))
    }
}

impl From<Label> for String {
    fn from(label: Label) -> String {
        label.to_string()
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Sample indices delimiting the anomaly development of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMarkers {
    /// First sample of the anomaly span (degradation begins here).
    pub onset_index: usize,
    /// First sample after full development (the failure is complete just
    /// before this index).
    pub critical_index: usize,
    /// First sample of the trailing nominal segment.
    pub recovery_index: usize,
}

/// A full two-channel experiment trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    /// Samples per second of the stored amplitude traces.
    pub sample_rate: u32,
    /// Upstream received-signal amplitudes.
    pub cat: Vec<f64>,
    /// Downstream received-signal amplitudes.
    pub cal: Vec<f64>,
    pub label: Label,
    /// Present exactly when `label != Nominal`.
    pub phases: Option<PhaseMarkers>,
    /// RNG seed the record was generated from.
    pub seed: u64,
}

impl SignalRecord {
    pub fn len(&self) -> usize {
        self.cat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cat.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::domain("sample_rate must be positive"));
        }
        if self.cat.is_empty() {
            return Err(Error::domain("record must contain at least one sample"));
        }
        if self.cat.len() != self.cal.len() {
            return Err(Error::domain(format!(
                "channel length mismatch: cat has {} samples, cal has {}",
                self.cat.len(),
                self.cal.len()
            )));
        }
        if let Some(bad) = self.cat.iter().chain(&self.cal).find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite sample value {bad}")));
        }
        match (self.label, &self.phases) {
            (Label::Nominal, Some(_)) => {
                Err(Error::domain("nominal record must not carry phase markers"))
            }
            (Label::Anomaly(_), None) => {
                Err(Error::domain("anomaly record must carry phase markers"))
            }
            (Label::Nominal, None) => Ok(()),
            (Label::Anomaly(_), Some(p)) => {
                if p.onset_index < p.critical_index
                    && p.critical_index <= p.recovery_index
                    && p.recovery_index <= self.len()
                {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "phase markers must satisfy onset < critical <= recovery <= {}: \
                         got onset={} critical={} recovery={}",
                        self.len(),
                        p.onset_index,
                        p.critical_index,
                        p.recovery_index
                    )))
                }
            }
        }
    }
}

/// Parameters of the experiment generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Track-circuit carrier frequency in Hz; metadata only (the stored
    /// traces are demodulated amplitudes). Must lie in `[8200, 11000]`.
    pub carrier_freq: f64,
    /// Samples per second of the stored amplitude traces.
    pub sample_rate: u32,
    /// Healthy-channel amplitude level.
    pub nominal_amplitude: f64,
    /// Standard deviation of the additive Gaussian sample noise.
    pub noise_sigma: f64,
    /// Nominal samples before anomaly onset.
    pub nominal_lead_samples: usize,
    /// Length of the anomaly development span.
    pub anomaly_samples: usize,
    /// Nominal samples after the critical point.
    pub nominal_tail_samples: usize,
    /// Amplitude deviation at the critical point, as a fraction of nominal.
    pub severity_max: f64,
    /// Exponent shaping how near-nominal the early stage of exponential
    /// envelopes stays (>= 1).
    pub early_flatness: f64,
    /// Peak amplitude of the class signature ripple, as a fraction of
    /// `nominal_amplitude`.
    pub signature_amplitude: f64,
    /// Fraction of the anomaly span over which the signature ripple ramps
    /// from zero to full amplitude.
    pub signature_ramp: f64,
    /// Per-sample dropout probability of intermittent envelopes at full
    /// development.
    pub dropout_max: f64,
    /// Switch point of step envelopes, as a fraction of the span.
    pub step_at: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            carrier_freq: 10_000.0,
            sample_rate: 50,
            nominal_amplitude: 1.0,
            noise_sigma: 0.02,
            nominal_lead_samples: 400,
            anomaly_samples: 1200,
            nominal_tail_samples: 200,
            severity_max: 0.25,
            early_flatness: 3.0,
            signature_amplitude: 0.1,
            signature_ramp: 0.015,
            dropout_max: 0.25,
            step_at: 0.7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(8200.0..=11_000.0).contains(&self.carrier_freq) {
            return Err(Error::config(format!(
                "carrier_freq must be in [8200, 11000] Hz, got {}",
                self.carrier_freq
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample_rate must be positive"));
        }
        if !(self.nominal_amplitude.is_finite() && self.nominal_amplitude > 0.0) {
            return Err(Error::config(format!(
                "nominal_amplitude must be positive and finite, got {}",
                self.nominal_amplitude
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config(format!(
                "noise_sigma must be non-negative and finite, got {}",
                self.noise_sigma
            )));
        }
        for (name, value) in [
            ("nominal_lead_samples", self.nominal_lead_samples),
            ("anomaly_samples", self.anomaly_samples),
            ("nominal_tail_samples", self.nominal_tail_samples),
        ] {
            if value == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if !(self.signature_amplitude.is_finite() && self.signature_amplitude >= 0.0) {
            return Err(Error::config(format!(
                "signature_amplitude must be non-negative and finite, got {}",
                self.signature_amplitude
            )));
        }
        if !(self.signature_ramp > 0.0 && self.signature_ramp <= 1.0) {
            return Err(Error::config(format!(
                "signature_ramp must be in (0, 1], got {}",
                self.signature_ramp
            )));
        }
        self.envelope_params().validate()
    }

    /// Envelope parameters bundled for [`degradation_envelope`].
    pub fn envelope_params(&self) -> EnvelopeParams {
        EnvelopeParams {
            severity_max: self.severity_max,
            early_flatness: self.early_flatness,
            dropout_max: self.dropout_max,
            step_at: self.step_at,
        }
    }
}

/// Generates one experiment record. `class = None` yields a fully nominal
/// record of the same total length.
pub fn generate_record(
    class: Option<&AnomalyClass>,
    config: &GeneratorConfig,
    seed: u64,
) -> Result<SignalRecord> {
    config.validate()?;
    if let Some(class) = class {
        class.validate()?;
    }

    let onset = config.nominal_lead_samples;
    let critical = onset + config.anomaly_samples;
    let total = critical + config.nominal_tail_samples;
    let amplitude = config.nominal_amplitude;
    let params = config.envelope_params();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| Error::config(format!("invalid noise distribution: {e}")))?;
    let phase_cat = rng.random::<f64>() * std::f64::consts::TAU;
    let phase_cal = rng.random::<f64>() * std::f64::consts::TAU;

    let mut cat = Vec::with_capacity(total);
    let mut cal = Vec::with_capacity(total);
    // t reaches exactly 1.0 on the last sample before the critical index.
    let span_denom = (config.anomaly_samples - 1).max(1) as f64;

    for i in 0..total {
        let (mut cat_level, mut cal_level) = (amplitude, amplitude);
        let (mut cat_ripple, mut cal_ripple) = (0.0, 0.0);
        if let Some(class) = class {
            if i >= onset && i < critical {
                let t = (i - onset) as f64 / span_denom;
                let m = degradation_envelope(class.envelope_kind, t, &params, &mut rng)?;
                let ripple_amp = config.signature_amplitude
                    * amplitude
                    * (t / config.signature_ramp).min(1.0);
                let arg = std::f64::consts::TAU * class.signature_freq * i as f64;
                if class.affected_channel.affects_cat() {
                    cat_level = amplitude * m;
                    cat_ripple = ripple_amp * (arg + phase_cat).sin();
                }
                if class.affected_channel.affects_cal() {
                    cal_level = amplitude * m;
                    cal_ripple = ripple_amp * (arg + phase_cal).sin();
                }
            }
        }
        cat.push(cat_level + cat_ripple + noise.sample(&mut rng));
        cal.push(cal_level + cal_ripple + noise.sample(&mut rng));
    }

    let record = SignalRecord {
        sample_rate: config.sample_rate,
        cat,
        cal,
        label: class.map_or(Label::Nominal, |c| Label::Anomaly(c.id)),
        phases: class.map(|_| PhaseMarkers {
            onset_index: onset,
            critical_index: critical,
            recovery_index: critical,
        }),
        seed,
    };
    record.validate()?;
    Ok(record)
}

/// One record entry of a [`DatasetManifest`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// CSV file name, relative to the manifest's directory.
    pub path: String,
    pub label: Label,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub onset_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub critical_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recovery_index: Option<usize>,
}

/// Index of a generated dataset: one entry per written CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Format tag, `"trackguard-manifest v1"`.
    pub format: String,
    /// Master seed the dataset was generated from.
    pub seed: u64,
    pub records: Vec<ManifestEntry>,
}

pub const MANIFEST_FORMAT: &str = "trackguard-manifest v1";
pub const MANIFEST_FILE_NAME: &str = "manifest.json";

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&body).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!(
                    "unsupported manifest format {:?} (expected {MANIFEST_FORMAT:?})",
                    manifest.format
                ),
            });
        }
        Ok(manifest)
    }
}

/// Generates a balanced dataset: `records_per_class` experiments for every
/// class in `classes` plus `nominal_records` healthy experiments, written
/// as CSVs under `out_dir` together with a `manifest.json` index.
///
/// Per-record seeds are derived from `seed` and the record's label and
/// index, so the same record content is produced regardless of catalog
/// order or how many other classes are generated.
pub fn generate_dataset(
    config: &GeneratorConfig,
    classes: &[AnomalyClass],
    records_per_class: usize,
    nominal_records: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    config.validate()?;
    catalog::validate_catalog(classes)?;
    if records_per_class == 0 {
        return Err(Error::config("records_per_class must be at least 1"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut entries = Vec::new();
    let emit = |class: Option<&AnomalyClass>, rec_idx: usize| -> Result<ManifestEntry> {
        let label = class.map_or(Label::Nominal, |c| Label::Anomaly(c.id));
        let record_seed = derive_seed(seed, &format!("record/{label}/{rec_idx}"));
        let record = generate_record(class, config, record_seed)?;
        let file_name = match class {
            Some(c) => format!("anomaly{:02}_rec{rec_idx:03}.csv", c.id),
            None => format!("nominal_rec{rec_idx:03}.csv"),
        };
        csv::write_csv(&record, &out_dir.join(&file_name))?;
        let phases = record.phases;
        Ok(ManifestEntry {
            path: file_name,
            label,
            seed: record_seed,
            onset_index: phases.map(|p| p.onset_index),
            critical_index: phases.map(|p| p.critical_index),
            recovery_index: phases.map(|p| p.recovery_index),
        })
    };

    for class in classes {
        for rec_idx in 0..records_per_class {
            entries.push(emit(Some(class), rec_idx)?);
        }
    }
    for rec_idx in 0..nominal_records {
        entries.push(emit(None, rec_idx)?);
    }

    let manifest = DatasetManifest { format: MANIFEST_FORMAT.to_string(), seed, records: entries };
    manifest.save(&out_dir.join(MANIFEST_FILE_NAME))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::catalog::{anomaly_class, full_catalog};
    use super::*;

    fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Welch's two-sample t statistic.
    fn welch_t(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let var = |xs: &[f64], m: f64| {
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
        };
        let (va, vb) = (var(a, ma), var(b, mb));
        (ma - mb) / (va / a.len() as f64 + vb / b.len() as f64).sqrt()
    }

    fn spans(record: &SignalRecord) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let p = record.phases.unwrap();
        (0..p.onset_index, p.onset_index..p.critical_index)
    }

    #[test]
    fn generation_is_deterministic() {
        let config = GeneratorConfig::default();
        let class = anomaly_class(4).unwrap();
        let a = generate_record(Some(&class), &config, 99).unwrap();
        let b = generate_record(Some(&class), &config, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_record(Some(&class), &config, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn nominal_record_has_no_markers_and_nominal_means() {
        let config = GeneratorConfig::default();
        let record = generate_record(None, &config, 7).unwrap();
        assert_eq!(record.label, Label::Nominal);
        assert!(record.phases.is_none());
        let total = config.nominal_lead_samples + config.anomaly_samples + config.nominal_tail_samples;
        assert_eq!(record.len(), total);
        let tol = 3.0 * config.noise_sigma / (total as f64).sqrt();
        assert!((mean(&record.cat) - config.nominal_amplitude).abs() < tol);
        assert!((mean(&record.cal) - config.nominal_amplitude).abs() < tol);
    }

    #[test]
    fn broken_rail_downstream_degrades_cal_only() {
        let config = GeneratorConfig::default();
        let class = anomaly_class(10).unwrap();
        let record = generate_record(Some(&class), &config, 1).unwrap();
        let (lead, span) = spans(&record);
        // Step envelope active for the last 30% of the span: mean drop
        // 0.3 * severity = 0.075, far above noise on a 1200-sample mean.
        assert!(mean(&record.cal[span.clone()]) < mean(&record.cal[lead.clone()]) - 0.03);
        assert!((mean(&record.cat[span]) - mean(&record.cat[lead])).abs() < 0.005);
    }

    #[test]
    fn lc_upstream_contact_degrades_cat_only() {
        let config = GeneratorConfig::default();
        let class = anomaly_class(3).unwrap();
        let record = generate_record(Some(&class), &config, 1).unwrap();
        let (lead, span) = spans(&record);
        assert!(mean(&record.cat[span.clone()]) < mean(&record.cat[lead.clone()]) - 0.03);
        assert!((mean(&record.cal[span]) - mean(&record.cal[lead])).abs() < 0.005);
    }

    #[test]
    fn unaffected_channels_statistically_nominal() {
        // Pool anomaly-span vs nominal-lead samples of the untouched channel
        // over 20 seeds; Welch t should stay inside the two-sided 1% critical
        // value (2.576 — normal approximation, exact to 3 decimals at these
        // sample sizes).
        let config = GeneratorConfig::default();
        for class in full_catalog() {
            let untouched_cal = class.affected_channel == catalog::AffectedChannel::Upstream;
            let untouched_cat = class.affected_channel == catalog::AffectedChannel::Downstream;
            if !(untouched_cal || untouched_cat) {
                continue;
            }
            let (mut lead_pool, mut span_pool) = (Vec::new(), Vec::new());
            for seed in 0..20 {
                let record = generate_record(Some(&class), &config, seed).unwrap();
                let channel = if untouched_cal { &record.cal } else { &record.cat };
                let (lead, span) = spans(&record);
                lead_pool.extend_from_slice(&channel[lead]);
                span_pool.extend_from_slice(&channel[span]);
            }
            let t = welch_t(&lead_pool, &span_pool);
            assert!(
                t.abs() < 2.576,
                "class {} leaks onto its unaffected channel: |t| = {:.3}",
                class.id,
                t.abs()
            );
        }
    }

    #[test]
    fn early_stage_invisible_to_mean_threshold_detector() {
        // Windows centered in the first 5% of the anomaly span must evade a
        // 3-sigma window-mean detector on either channel at least 90% of the
        // time, for every class.
        let config = GeneratorConfig::default();
        let (window_len, stride) = (64usize, 16usize);
        let threshold = 3.0 * config.noise_sigma;
        for class in full_catalog() {
            let (mut windows, mut fired) = (0usize, 0usize);
            for seed in 0..3 {
                let record = generate_record(Some(&class), &config, seed).unwrap();
                let p = record.phases.unwrap();
                let early_end = p.onset_index + config.anomaly_samples / 20;
                let mut start = 0;
                while start + window_len <= record.len() {
                    let center = start + window_len / 2;
                    if center >= p.onset_index && center < early_end {
                        windows += 1;
                        let dev = |ch: &[f64]| {
                            (mean(&ch[start..start + window_len]) - config.nominal_amplitude).abs()
                        };
                        if dev(&record.cat) > threshold || dev(&record.cal) > threshold {
                            fired += 1;
                        }
                    }
                    start += stride;
                }
            }
            assert!(windows > 0);
            let rate = fired as f64 / windows as f64;
            assert!(rate < 0.10, "class {}: early-stage detector rate {rate}", class.id);
        }
    }

    #[test]
    fn intermittent_class_has_binary_dropouts_late_in_span() {
        // Zero the signature ripple so the two envelope levels are the only
        // structure besides the sample noise.
        let config = GeneratorConfig { signature_amplitude: 0.0, ..Default::default() };
        let class = anomaly_class(8).unwrap();
        let record = generate_record(Some(&class), &config, 5).unwrap();
        let p = record.phases.unwrap();
        let late = (p.onset_index + (config.anomaly_samples * 9) / 10)..p.critical_index;
        let degraded_level = config.nominal_amplitude * (1.0 - config.severity_max);
        let near = |v: f64, level: f64| (v - level).abs() < 6.0 * config.noise_sigma + 0.03;
        let dropped = record.cal[late.clone()]
            .iter()
            .filter(|&&v| near(v, degraded_level))
            .count();
        let held = record.cal[late.clone()].iter().filter(|&&v| near(v, 1.0)).count();
        assert_eq!(dropped + held, late.len(), "samples should cluster at two levels");
        // Late-span dropout rate is near dropout_max (0.25 by default).
        let rate = dropped as f64 / late.len() as f64;
        assert!((0.12..0.40).contains(&rate), "late dropout rate {rate}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut config = GeneratorConfig { carrier_freq: 5000.0, ..Default::default() };
        assert!(generate_record(None, &config, 1).is_err());
        config = GeneratorConfig { anomaly_samples: 0, ..Default::default() };
        assert!(generate_record(None, &config, 1).is_err());
        config = GeneratorConfig { severity_max: 1.5, ..Default::default() };
        assert!(generate_record(None, &config, 1).is_err());
    }

    #[test]
    fn dataset_writes_expected_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let config = GeneratorConfig {
            nominal_lead_samples: 40,
            anomaly_samples: 120,
            nominal_tail_samples: 20,
            ..Default::default()
        };
        let classes = super::catalog::default_catalog();
        let manifest =
            generate_dataset(&config, &classes, 3, 0, 42, dir.path()).unwrap();
        assert_eq!(manifest.records.len(), 30);
        let csv_count = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref().unwrap().path().extension().is_some_and(|ext| ext == "csv")
            })
            .count();
        assert_eq!(csv_count, 30);
        let loaded = DatasetManifest::load(&dir.path().join(MANIFEST_FILE_NAME)).unwrap();
        assert_eq!(loaded, manifest);
        for entry in &manifest.records {
            assert!(matches!(entry.label, Label::Anomaly(_)));
            assert!(entry.onset_index.is_some());
        }
    }

    #[test]
    fn dataset_regeneration_is_byte_identical() {
        let config = GeneratorConfig {
            nominal_lead_samples: 40,
            anomaly_samples: 120,
            nominal_tail_samples: 20,
            ..Default::default()
        };
        let classes = vec![anomaly_class(2).unwrap(), anomaly_class(9).unwrap()];
        let read_all = |dir: &Path| {
            let mut files: Vec<_> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            files
                .into_iter()
                .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()))
                .collect::<Vec<_>>()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_dataset(&config, &classes, 2, 1, 7, dir_a.path()).unwrap();
        generate_dataset(&config, &classes, 2, 1, 7, dir_b.path()).unwrap();
        assert_eq!(read_all(dir_a.path()), read_all(dir_b.path()));
    }

    #[test]
    fn empty_class_list_yields_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest =
            generate_dataset(&GeneratorConfig::default(), &[], 3, 0, 1, dir.path()).unwrap();
        assert!(manifest.records.is_empty());
    }

    #[test]
    fn label_round_trips_through_strings() {
        for label in [Label::Nominal, Label::Anomaly(1), Label::Anomaly(11)] {
            let s = label.to_string();
            assert_eq!(s.parse::<Label>().unwrap(), label);
        }
        assert!("Anomaly12".parse::<Label>().is_err());
        assert!("Anomaly0".parse::<Label>().is_err());
        assert!("anything".parse::<Label>().is_err());
    }

    #[test]
    fn label_ordering_puts_nominal_first() {
        let mut labels = vec![Label::Anomaly(4), Label::Nominal, Label::Anomaly(1)];
        labels.sort();
        assert_eq!(labels, vec![Label::Nominal, Label::Anomaly(1), Label::Anomaly(4)]);
    }
}
