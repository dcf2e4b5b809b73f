//! Record-to-window preprocessing.
//!
//! Raw experiment traces become classifier inputs in three steps:
//!
//! 1. **Denoise** — centered moving average of radius `smooth_radius`
//!    (kernel shrinks at the edges; radius 0 is the identity).
//! 2. **Slide** — overlapping fixed-length windows every `stride` samples,
//!    each labeled from the record's phase markers.
//! 3. **Normalize** — per window and per channel, subtract the mean and
//!    divide by the population standard deviation, which removes the
//!    absolute signal level that varies with installation location and
//!    configuration.
//!
//! [`preprocess_record`] composes all three.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalgen::{Label, SignalRecord};

/// How a window straddling a phase boundary is labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelRule {
    /// Window takes the record's class iff its center sample lies inside
    /// the anomaly span `[onset, critical)`.
    CenterPhase,
    /// Window takes the record's class iff strictly more than half of its
    /// samples lie inside the anomaly span.
    MajorityPhase,
}

/// Windowing and denoising parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub window_len: usize,
    pub stride: usize,
    /// Moving-average radius; the smoothing kernel spans
    /// `2 * smooth_radius + 1` samples.
    pub smooth_radius: usize,
    pub label_rule: LabelRule,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            window_len: 64,
            stride: 16,
            // Radius 1 keeps the first spectral null of the smoother (at 1/3
            // cycles per sample) above every class signature frequency, so
            // smoothing attenuates but never erases a signature.
            smooth_radius: 1,
            label_rule: LabelRule::CenterPhase,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::config("window_len must be positive"));
        }
        if self.stride == 0 || self.stride > self.window_len {
            return Err(Error::config(format!(
                "stride must satisfy 1 <= stride <= window_len ({}), got {}",
                self.window_len, self.stride
            )));
        }
        Ok(())
    }
}

/// One fixed-length two-channel window cut from a record.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWindow {
    pub cat: Vec<f64>,
    pub cal: Vec<f64>,
    /// Identifier of the record this window came from.
    pub source_id: String,
    /// Index of the window's first sample within the source record.
    pub start_index: usize,
    pub label: Label,
    /// Position of the window center within the anomaly span, in `[0, 1]`;
    /// present exactly when `label != Nominal`.
    pub stage_fraction: Option<f64>,
}

impl PulseWindow {
    pub fn window_len(&self) -> usize {
        self.cat.len()
    }
}

/// Centered moving average with a kernel of `2 * smooth_radius + 1`
/// samples, shrunk near the edges to the available samples. Radius 0
/// returns the input unchanged.
pub fn denoise(channel: &[f64], smooth_radius: usize) -> Vec<f64> {
    if smooth_radius == 0 || channel.is_empty() {
        return channel.to_vec();
    }
    let n = channel.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for (i, v) in channel.iter().enumerate() {
        prefix.push(prefix[i] + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(smooth_radius);
            let hi = (i + smooth_radius + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Applies [`denoise`] to both channels of a record.
pub fn denoise_record(record: &SignalRecord, smooth_radius: usize) -> SignalRecord {
    SignalRecord {
        cat: denoise(&record.cat, smooth_radius),
        cal: denoise(&record.cal, smooth_radius),
        ..record.clone()
    }
}

/// Cuts a record into overlapping windows starting at `0, stride, 2*stride,
/// ...` as long as a full window fits, labeling each via the configured
/// rule. `source_id` identifies the record in downstream artifacts.
pub fn slide_windows(
    record: &SignalRecord,
    config: &PreprocessConfig,
    source_id: &str,
) -> Result<Vec<PulseWindow>> {
    config.validate()?;
    record.validate()?;
    let len = record.len();
    if config.window_len > len {
        return Err(Error::domain(format!(
            "window_len {} exceeds record length {len}",
            config.window_len
        )));
    }

    let mut windows = Vec::with_capacity((len - config.window_len) / config.stride + 1);
    let mut start = 0;
    while start + config.window_len <= len {
        let end = start + config.window_len;
        let (label, stage_fraction) = match (record.label, record.phases) {
            (Label::Anomaly(id), Some(p)) => {
                let in_span = match config.label_rule {
                    LabelRule::CenterPhase => {
                        let center = start + config.window_len / 2;
                        center >= p.onset_index && center < p.critical_index
                    }
                    LabelRule::MajorityPhase => {
                        let overlap = end.min(p.critical_index).saturating_sub(
                            start.max(p.onset_index).min(end.min(p.critical_index)),
                        );
                        2 * overlap > config.window_len
                    }
                };
                if in_span {
                    let center = (start + config.window_len / 2) as f64;
                    let span = (p.critical_index - p.onset_index) as f64;
                    let fraction = ((center - p.onset_index as f64) / span).clamp(0.0, 1.0);
                    (Label::Anomaly(id), Some(fraction))
                } else {
                    (Label::Nominal, None)
                }
            }
            _ => (Label::Nominal, None),
        };
        windows.push(PulseWindow {
            cat: record.cat[start..end].to_vec(),
            cal: record.cal[start..end].to_vec(),
            source_id: source_id.to_string(),
            start_index: start,
            label,
            stage_fraction,
        });
        start += config.stride;
    }
    Ok(windows)
}

fn normalize_channel(channel: &mut [f64]) {
    let n = channel.len() as f64;
    let mean = channel.iter().sum::<f64>() / n;
    let var = channel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 {
        for v in channel.iter_mut() {
            *v = (*v - mean) / std;
        }
    } else {
        channel.fill(0.0);
    }
}

/// Normalizes each channel to zero mean and unit population standard
/// deviation; a constant channel becomes all zeros.
pub fn normalize(mut window: PulseWindow) -> PulseWindow {
    normalize_channel(&mut window.cat);
    normalize_channel(&mut window.cal);
    window
}

/// Full preprocessing of one record: denoise, slide, normalize.
pub fn preprocess_record(
    record: &SignalRecord,
    config: &PreprocessConfig,
    source_id: &str,
) -> Result<Vec<PulseWindow>> {
    let denoised = denoise_record(record, config.smooth_radius);
    let windows = slide_windows(&denoised, config, source_id)?;
    Ok(windows.into_iter().map(normalize).collect())
}

/// Sorts windows into the canonical `(source_id, start_index)` order.
pub fn sort_windows(windows: &mut [PulseWindow]) {
    windows.sort_by(|a, b| {
        (a.source_id.as_str(), a.start_index).cmp(&(b.source_id.as_str(), b.start_index))
    });
}

/// Writes windows as one CSV with columns
/// `source_id,start_index,label,stage_fraction,cat_0..,cal_0..`; the
/// `stage_fraction` field is empty for nominal windows.
pub fn write_window_csv(windows: &[PulseWindow], path: &Path) -> Result<()> {
    let Some(first) = windows.first() else {
        return Err(Error::domain("cannot dump an empty window list"));
    };
    let len = first.window_len();
    if windows.iter().any(|w| w.window_len() != len || w.cal.len() != len) {
        return Err(Error::domain("all dumped windows must share one window length"));
    }
    let mut out = String::new();
    out.push_str("source_id,start_index,label,stage_fraction");
    for i in 0..len {
        write!(out, ",cat_{i}").expect("writing to a String cannot fail");
    }
    for i in 0..len {
        write!(out, ",cal_{i}").expect("writing to a String cannot fail");
    }
    out.push('\n');
    for w in windows {
        write!(out, "{},{},{},", w.source_id, w.start_index, w.label)
            .expect("writing to a String cannot fail");
        if let Some(f) = w.stage_fraction {
            write!(out, "{f}").expect("writing to a String cannot fail");
        }
        for v in w.cat.iter().chain(&w.cal) {
            write!(out, ",{v}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a window CSV produced by [`write_window_csv`].
pub fn read_window_csv(path: &Path) -> Result<Vec<PulseWindow>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::CsvParse { path: path.into(), line, message };
    let mut lines = body.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".to_string()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 6 || columns[..4] != ["source_id", "start_index", "label", "stage_fraction"]
    {
        return Err(err(1, format!("unexpected window CSV header {header:?}")));
    }
    let len = (columns.len() - 4) / 2;
    if columns.len() != 4 + 2 * len
        || columns[4] != "cat_0"
        || columns[4 + len] != "cal_0"
    {
        return Err(err(1, format!("unexpected window CSV header {header:?}")));
    }

    let mut windows = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + 2 * len {
            return Err(err(
                line_no,
                format!("expected {} fields, got {}", 4 + 2 * len, fields.len()),
            ));
        }
        let start_index: usize = fields[1]
            .parse()
            .map_err(|_| err(line_no, format!("invalid start_index {:?}", fields[1])))?;
        let label: Label = fields[2]
            .parse()
            .map_err(|e: Error| err(line_no, e.to_string()))?;
        let stage_fraction = if fields[3].is_empty() {
            None
        } else {
            Some(
                fields[3]
                    .parse::<f64>()
                    .map_err(|_| err(line_no, format!("invalid stage_fraction {:?}", fields[3])))?,
            )
        };
        if stage_fraction.is_some() != matches!(label, Label::Anomaly(_)) {
            return Err(err(
                line_no,
                "stage_fraction must be present exactly for anomaly windows".to_string(),
            ));
        }
        let parse_amp = |s: &str| -> Result<f64> {
            let v: f64 =
                s.parse().map_err(|_| err(line_no, format!("invalid amplitude {s:?}")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite amplitude {s:?}")));
            }
            Ok(v)
        };
        let cat = fields[4..4 + len].iter().map(|s| parse_amp(s)).collect::<Result<Vec<_>>>()?;
        let cal =
            fields[4 + len..].iter().map(|s| parse_amp(s)).collect::<Result<Vec<_>>>()?;
        windows.push(PulseWindow {
            cat,
            cal,
            source_id: fields[0].to_string(),
            start_index,
            label,
            stage_fraction,
        });
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::{catalog::anomaly_class, generate_record, GeneratorConfig, PhaseMarkers};
    use proptest::prelude::*;

    fn nominal_record(samples: Vec<f64>) -> SignalRecord {
        SignalRecord {
            sample_rate: 50,
            cat: samples.clone(),
            cal: samples,
            label: Label::Nominal,
            phases: None,
            seed: 0,
        }
    }

    fn anomaly_record(len: usize, onset: usize, critical: usize) -> SignalRecord {
        SignalRecord {
            sample_rate: 50,
            cat: vec![1.0; len],
            cal: vec![1.0; len],
            label: Label::Anomaly(4),
            phases: Some(PhaseMarkers {
                onset_index: onset,
                critical_index: critical,
                recovery_index: critical,
            }),
            seed: 0,
        }
    }

    fn window(cat: Vec<f64>, cal: Vec<f64>) -> PulseWindow {
        PulseWindow {
            cat,
            cal,
            source_id: "w".to_string(),
            start_index: 0,
            label: Label::Nominal,
            stage_fraction: None,
        }
    }

    #[test]
    fn denoise_radius_zero_is_identity() {
        assert_eq!(denoise(&[1.0, 2.0, 3.0], 0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn denoise_shrinks_kernel_at_edges() {
        assert_eq!(denoise(&[1.0, 2.0, 3.0], 1), vec![1.5, 2.0, 2.5]);
    }

    #[test]
    fn denoise_preserves_constants() {
        for radius in [1, 3, 10] {
            assert_eq!(denoise(&[4.0; 7], radius), vec![4.0; 7]);
        }
    }

    #[test]
    fn window_count_and_starts_match_arithmetic() {
        let record = nominal_record((0..100).map(f64::from).collect());
        let config = PreprocessConfig { window_len: 20, stride: 10, ..Default::default() };
        let windows = slide_windows(&record, &config, "r").unwrap();
        assert_eq!(windows.len(), 9);
        let starts: Vec<usize> = windows.iter().map(|w| w.start_index).collect();
        assert_eq!(starts, (0..=80).step_by(10).collect::<Vec<_>>());
    }

    #[test]
    fn center_rule_boundaries() {
        // onset 50, critical 90; window centers fall at start + 10.
        let record = anomaly_record(120, 50, 90);
        let config = PreprocessConfig { window_len: 20, stride: 5, ..Default::default() };
        let windows = slide_windows(&record, &config, "r").unwrap();
        for w in &windows {
            let center = w.start_index + 10;
            if (50..90).contains(&center) {
                assert_eq!(w.label, Label::Anomaly(4), "center {center}");
                let expected = (center as f64 - 50.0) / 40.0;
                assert!((w.stage_fraction.unwrap() - expected).abs() < 1e-12);
            } else {
                assert_eq!(w.label, Label::Nominal, "center {center}");
                assert!(w.stage_fraction.is_none());
            }
        }
        // A window centered exactly at onset carries stage 0.
        let at_onset = windows.iter().find(|w| w.start_index + 10 == 50).unwrap();
        assert_eq!(at_onset.label, Label::Anomaly(4));
        assert_eq!(at_onset.stage_fraction, Some(0.0));
    }

    #[test]
    fn majority_rule_requires_strict_majority_of_span_samples() {
        let record = anomaly_record(120, 50, 90);
        let config = PreprocessConfig {
            window_len: 20,
            stride: 1,
            label_rule: LabelRule::MajorityPhase,
            ..Default::default()
        };
        let windows = slide_windows(&record, &config, "r").unwrap();
        for w in &windows {
            let overlap =
                (w.start_index + 20).min(90).saturating_sub(w.start_index.clamp(50, 90));
            let expected = if 2 * overlap > 20 { Label::Anomaly(4) } else { Label::Nominal };
            assert_eq!(w.label, expected, "start {}", w.start_index);
        }
    }

    #[test]
    fn anomaly_span_fully_covered_by_windows() {
        let config = GeneratorConfig::default();
        let class = anomaly_class(4).unwrap();
        let record = generate_record(Some(&class), &config, 1).unwrap();
        let pc = PreprocessConfig::default();
        let windows = slide_windows(&record, &pc, "r").unwrap();
        let p = record.phases.unwrap();
        let mut covered = vec![false; record.len()];
        for w in &windows {
            for c in covered.iter_mut().skip(w.start_index).take(pc.window_len) {
                *c = true;
            }
        }
        assert!(
            covered[p.onset_index..p.critical_index].iter().all(|&c| c),
            "anomaly span has uncovered samples"
        );
    }

    #[test]
    fn oversized_window_rejected() {
        let record = nominal_record(vec![1.0; 10]);
        let config = PreprocessConfig { window_len: 11, stride: 1, ..Default::default() };
        assert!(matches!(slide_windows(&record, &config, "r"), Err(Error::Domain(_))));
    }

    #[test]
    fn normalize_two_point_example() {
        let w = normalize(window(vec![1.0, 3.0], vec![1.0, 3.0]));
        assert!((w.cat[0] - -1.0).abs() < 1e-12);
        assert!((w.cat[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_constant_channel_is_zeros() {
        let w = normalize(window(vec![5.0, 5.0, 5.0], vec![1.0, 2.0, 3.0]));
        assert_eq!(w.cat, vec![0.0, 0.0, 0.0]);
        assert!(w.cal.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn normalize_idempotent() {
        let w = normalize(window(vec![1.0, 4.0, 2.0, 8.0], vec![0.5, 0.25, 0.125, 0.0625]));
        let again = normalize(w.clone());
        for (a, b) in w.cat.iter().zip(&again.cat).chain(w.cal.iter().zip(&again.cal)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn normalized_moments_and_scale_offset_invariance(
            xs in proptest::collection::vec(-1e3f64..1e3, 8..64),
            a in 1e-3f64..1e3,
            b in -1e3f64..1e3,
        ) {
            let plain = normalize(window(xs.clone(), xs.clone()));
            let n = plain.cat.len() as f64;
            let mean: f64 = plain.cat.iter().sum::<f64>() / n;
            let var: f64 = plain.cat.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-9);
            // A constant input collapses to zeros; otherwise the population
            // std must be 1.
            prop_assert!(var < 1e-9 || (var.sqrt() - 1.0).abs() < 1e-9);

            let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let transformed = normalize(window(scaled.clone(), scaled));
            for (p, t) in plain.cat.iter().zip(&transformed.cat) {
                prop_assert!((p - t).abs() < 1e-9, "normalize(a*x+b) != normalize(x)");
            }
        }

        #[test]
        fn window_count_formula(
            len in 1usize..500,
            window_len in 1usize..100,
            stride in 1usize..100,
        ) {
            prop_assume!(stride <= window_len && window_len <= len);
            let record = nominal_record(vec![0.5; len]);
            let config = PreprocessConfig { window_len, stride, ..Default::default() };
            let windows = slide_windows(&record, &config, "r").unwrap();
            prop_assert_eq!(windows.len(), (len - window_len) / stride + 1);
            // Every window carries exactly one label and a consistent stage.
            for w in &windows {
                prop_assert!(w.stage_fraction.is_none());
                prop_assert_eq!(w.label, Label::Nominal);
            }
        }
    }

    #[test]
    fn preprocess_record_normalizes_every_window() {
        let config = GeneratorConfig::default();
        let class = anomaly_class(10).unwrap();
        let record = generate_record(Some(&class), &config, 3).unwrap();
        let windows = preprocess_record(&record, &PreprocessConfig::default(), "rec").unwrap();
        assert!(!windows.is_empty());
        for w in &windows {
            for channel in [&w.cat, &w.cal] {
                let n = channel.len() as f64;
                let mean: f64 = channel.iter().sum::<f64>() / n;
                let var: f64 = channel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                assert!(mean.abs() < 1e-9);
                assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
            assert_eq!(w.stage_fraction.is_some(), w.label != Label::Nominal);
        }
    }

    #[test]
    fn window_csv_round_trip() {
        let config = GeneratorConfig {
            nominal_lead_samples: 40,
            anomaly_samples: 120,
            nominal_tail_samples: 20,
            ..Default::default()
        };
        let class = anomaly_class(7).unwrap();
        let record = generate_record(Some(&class), &config, 11).unwrap();
        let windows = preprocess_record(&record, &PreprocessConfig::default(), "rec7").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.csv");
        write_window_csv(&windows, &path).unwrap();
        let back = read_window_csv(&path).unwrap();
        assert_eq!(back, windows);
    }

    #[test]
    fn sort_orders_by_source_then_start() {
        let mut windows = vec![
            PulseWindow { start_index: 5, source_id: "b".into(), ..window(vec![0.0], vec![0.0]) },
            PulseWindow { start_index: 9, source_id: "a".into(), ..window(vec![0.0], vec![0.0]) },
            PulseWindow { start_index: 2, source_id: "a".into(), ..window(vec![0.0], vec![0.0]) },
        ];
        sort_windows(&mut windows);
        let order: Vec<(String, usize)> =
            windows.iter().map(|w| (w.source_id.clone(), w.start_index)).collect();
        assert_eq!(order, vec![("a".into(), 2), ("a".into(), 9), ("b".into(), 5)]);
    }
}
