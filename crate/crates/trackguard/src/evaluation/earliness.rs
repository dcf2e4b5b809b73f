//! Earliness-of-detection benchmark: how far into the degradation span a
//! method first commits to the correct diagnosis.
//!
//! Two detectors are compared on whole records:
//! * an amplitude-threshold baseline that flags window means deviating from
//!   the record's own nominal lead statistics (computed on the raw signal,
//!   no smoothing or normalization), and
//! * the classifier pipeline, which fires once the conformal prediction set
//!   collapses to exactly the true class.
//!
//! Both use the same persistence rule: `m` consecutive agreeing windows,
//! with the detection index being the center of the first window of the run.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, predict_proba_batch, ClassifierModel};
use crate::conformal::{predict_set, CalibrationResult};
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_record, PreprocessConfig};
use crate::signalgen::{Label, SignalRecord};

use super::EvalConfig;

/// Per-channel mean and population standard deviation of a record's
/// nominal lead, used by the threshold baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalStats {
    pub cat_mean: f64,
    pub cat_std: f64,
    pub cal_mean: f64,
    pub cal_std: f64,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl NominalStats {
    /// Minimum lead length accepted for estimating nominal statistics.
    pub const MIN_LEAD: usize = 30;

    /// Estimates stats from the record's nominal region: everything before
    /// `onset_index` for anomalous records, the whole record otherwise.
    pub fn for_record(record: &SignalRecord) -> Result<NominalStats> {
        let lead = record
            .phases
            .map(|p| p.onset_index)
            .unwrap_or(record.cat.len());
        if lead < Self::MIN_LEAD {
            return Err(Error::config(format!(
                "nominal lead of {lead} samples is too short to estimate baseline statistics \
                 (need at least {})",
                Self::MIN_LEAD
            )));
        }
        let (cat_mean, cat_std) = mean_std(&record.cat[..lead]);
        let (cal_mean, cal_std) = mean_std(&record.cal[..lead]);
        Ok(NominalStats { cat_mean, cat_std, cal_mean, cal_std })
    }
}

/// Scans `(center_index, agrees)` flags in time order and returns the center
/// of the first window of the first run of `m` consecutive agreements.
/// A run only counts if it starts before `cutoff` (when given); because
/// centers increase monotonically, a run starting at or past the cutoff ends
/// the search.
pub fn first_persistent_run(
    flags: &[(usize, bool)],
    m: usize,
    cutoff: Option<usize>,
) -> Option<usize> {
    assert!(m >= 1, "persistence must be at least 1");
    let mut run_start = None;
    let mut run_len = 0usize;
    for &(center, agrees) in flags {
        if agrees {
            let start = *run_start.get_or_insert(center);
            run_len += 1;
            if run_len >= m {
                return match cutoff {
                    Some(c) if start >= c => None,
                    _ => Some(start),
                };
            }
        } else {
            run_start = None;
            run_len = 0;
        }
    }
    None
}

/// Amplitude-threshold baseline detector.
///
/// Slides the same `window_len`/`stride` grid as the window pipeline over the
/// *raw* record and flags a window when either channel's mean deviates from
/// its nominal mean by more than `k` standard deviations. Returns the center
/// of the first window of the first run of `m` flagged windows, or `None`.
/// For anomalous records, runs starting at or after `critical_index` do not
/// count as detections.
pub fn threshold_baseline_detect(
    record: &SignalRecord,
    stats: &NominalStats,
    k: f64,
    m: usize,
    pre: &PreprocessConfig,
) -> Result<Option<usize>> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::config(format!("k must be non-negative and finite, got {k}")));
    }
    if m == 0 {
        return Err(Error::config("m must be at least 1"));
    }
    pre.validate()?;
    record.validate()?;
    let len = record.cat.len();
    if len < pre.window_len {
        return Err(Error::domain(format!(
            "record of {len} samples is shorter than one {}-sample window",
            pre.window_len
        )));
    }
    let window = pre.window_len as f64;
    let mut flags = Vec::new();
    let mut start = 0;
    while start + pre.window_len <= len {
        let cat_mean = record.cat[start..start + pre.window_len].iter().sum::<f64>() / window;
        let cal_mean = record.cal[start..start + pre.window_len].iter().sum::<f64>() / window;
        let deviates = (cat_mean - stats.cat_mean).abs() > k * stats.cat_std
            || (cal_mean - stats.cal_mean).abs() > k * stats.cal_std;
        flags.push((start + pre.window_len / 2, deviates));
        start += pre.stride;
    }
    let cutoff = record.phases.map(|p| p.critical_index);
    Ok(first_persistent_run(&flags, m, cutoff))
}

/// What counts as the model committing to a class on one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionRule {
    /// The conformal prediction set is exactly the singleton true class.
    ConformalSingleton,
    /// Plain argmax equals the true class (ablation; ignores set size).
    Argmax,
}

/// Model-side detector: preprocesses the record exactly like the training
/// pipeline (smooth, window, normalize), asks the model for each window in
/// time order, and returns the center of the first window of the first run
/// of `m` windows satisfying the detection rule. Runs starting at or after
/// `critical_index` do not count. The record must be anomalous.
pub fn model_first_detection(
    model: &ClassifierModel,
    calib: &CalibrationResult,
    record: &SignalRecord,
    pre: &PreprocessConfig,
    m: usize,
    rule: DetectionRule,
) -> Result<Option<usize>> {
    if m == 0 {
        return Err(Error::config("m must be at least 1"));
    }
    let Label::Anomaly(_) = record.label else {
        return Err(Error::domain(
            "earliness detection requires an anomalous record with phase markers",
        ));
    };
    let critical = record
        .phases
        .ok_or_else(|| Error::domain("anomalous record is missing phase markers"))?
        .critical_index;
    let true_index = model.class_index(record.label)?;
    let windows = preprocess_record(record, pre, "earliness")?;
    let probs = predict_proba_batch(model, &windows)?;
    let mut flags = Vec::with_capacity(windows.len());
    for (w, row) in windows.iter().zip(probs.rows()) {
        let row = row.as_slice().expect("contiguous row");
        let agrees = match rule {
            DetectionRule::ConformalSingleton => {
                let set = predict_set(row, calib)?;
                set.labels == [true_index]
            }
            DetectionRule::Argmax => argmax(row) == true_index,
        };
        flags.push((w.start_index + pre.window_len / 2, agrees));
    }
    Ok(first_persistent_run(&flags, m, Some(critical)))
}

/// Detection position as a percentage of the degradation span:
/// `100 * (detection - onset) / (critical - onset)`.
/// `None` when the detection index lies outside `[onset, critical)`.
pub fn earliness_percent(detection: usize, onset: usize, critical: usize) -> Option<f64> {
    assert!(critical > onset, "degradation span must be non-empty");
    (onset..critical)
        .contains(&detection)
        .then(|| 100.0 * (detection - onset) as f64 / (critical - onset) as f64)
}

/// Which detector produced a row of the earliness report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionMethod {
    Model,
    Threshold,
}

impl fmt::Display for DetectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionMethod::Model => "model",
            DetectionMethod::Threshold => "threshold",
        })
    }
}

/// One record × one method.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlinessEntry {
    pub record_id: String,
    pub class: Label,
    pub method: DetectionMethod,
    pub first_detection_index: Option<usize>,
    pub earliness_percent: Option<f64>,
}

/// Mean earliness for one method on one class. Records without a detection
/// inside the degradation span are scored as 100 % (detection only at
/// failure time) before averaging; `detected` counts the ones that did fire
/// inside the span.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlinessSummaryRow {
    pub method: DetectionMethod,
    pub class: Label,
    pub mean_earliness_percent: f64,
    pub records: usize,
    pub detected: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EarlinessReport {
    pub entries: Vec<EarlinessEntry>,
    pub summary: Vec<EarlinessSummaryRow>,
}

fn imputed(e: &EarlinessEntry) -> f64 {
    e.earliness_percent.unwrap_or(100.0)
}

impl EarlinessReport {
    fn build_summary(entries: &[EarlinessEntry]) -> Vec<EarlinessSummaryRow> {
        let mut keys: Vec<(DetectionMethod, Label)> =
            entries.iter().map(|e| (e.method, e.class)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(method, class)| {
                let group: Vec<&EarlinessEntry> = entries
                    .iter()
                    .filter(|e| e.method == method && e.class == class)
                    .collect();
                EarlinessSummaryRow {
                    method,
                    class,
                    mean_earliness_percent: group.iter().map(|e| imputed(e)).sum::<f64>()
                        / group.len() as f64,
                    records: group.len(),
                    detected: group.iter().filter(|e| e.earliness_percent.is_some()).count(),
                }
            })
            .collect()
    }

    /// Mean earliness for a method across every record, with undetected
    /// records scored as 100 %. `None` if the report has no such entries.
    pub fn mean_earliness(&self, method: DetectionMethod) -> Option<f64> {
        let group: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.method == method)
            .map(imputed)
            .collect();
        (!group.is_empty()).then(|| group.iter().sum::<f64>() / group.len() as f64)
    }

    /// Fraction of records where the method fired inside the degradation span.
    pub fn detection_rate(&self, method: DetectionMethod) -> Option<f64> {
        let group: Vec<&EarlinessEntry> =
            self.entries.iter().filter(|e| e.method == method).collect();
        (!group.is_empty()).then(|| {
            group.iter().filter(|e| e.earliness_percent.is_some()).count() as f64
                / group.len() as f64
        })
    }
}

/// Runs both detectors over a set of anomalous records and assembles the
/// per-record entries plus the per-method, per-class summary. Records are
/// processed in the order given; entries keep that order (model row first,
/// then threshold row, per record).
pub fn earliness_benchmark(
    records: &[(String, SignalRecord)],
    model: &ClassifierModel,
    calib: &CalibrationResult,
    pre: &PreprocessConfig,
    eval: &EvalConfig,
) -> Result<EarlinessReport> {
    eval.validate()?;
    let mut entries = Vec::with_capacity(records.len() * 2);
    for (id, record) in records {
        let phases = match (record.label, record.phases) {
            (Label::Anomaly(_), Some(p)) => p,
            _ => {
                return Err(Error::domain(format!(
                    "record {id} is not anomalous; the earliness benchmark needs degradation spans"
                )))
            }
        };
        let stats = NominalStats::for_record(record)?;
        let span = (phases.onset_index, phases.critical_index);
        let model_detection = model_first_detection(
            model,
            calib,
            record,
            pre,
            eval.m,
            DetectionRule::ConformalSingleton,
        )?;
        let baseline_detection = threshold_baseline_detect(record, &stats, eval.k, eval.m, pre)?;
        for (method, detection) in [
            (DetectionMethod::Model, model_detection),
            (DetectionMethod::Threshold, baseline_detection),
        ] {
            entries.push(EarlinessEntry {
                record_id: id.clone(),
                class: record.label,
                method,
                first_detection_index: detection,
                earliness_percent: detection.and_then(|d| earliness_percent(d, span.0, span.1)),
            });
        }
    }
    let summary = EarlinessReport::build_summary(&entries);
    Ok(EarlinessReport { entries, summary })
}
