//! Report emission: deterministic CSV and plain-text artifacts describing a
//! finished run. Rerunning the same inputs rewrites byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classifier::{predict_proba_batch, ClassifierModel};
use crate::conformal::{
    average_set_size, class_conditional_coverage, empty_set_rate, marginal_coverage, predict_set,
    write_coverage_csv, CalibrationResult, PredictionSet,
};
use crate::error::{Error, Result};
use crate::preprocess::{PreprocessConfig, PulseWindow};
use crate::signalgen::{Label, SignalRecord};

use super::earliness::{earliness_benchmark, DetectionMethod, EarlinessEntry, EarlinessReport};
use super::{evaluate_classifier, ConfusionMatrix, EvalConfig};

pub const CONFUSION_FILE: &str = "confusion_matrix.csv";
pub const CONFUSION_NORMALIZED_FILE: &str = "confusion_matrix_normalized.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const EARLINESS_FILE: &str = "earliness.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Empty-set behaviour on windows whose true class the model was never
/// shown: the unknown-anomaly signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyMetrics {
    pub held_out_windows: usize,
    pub held_out_empty_set_rate: f64,
}

impl NoveltyMetrics {
    /// How much more often sets come back empty on unknown-class windows
    /// than on in-distribution test windows. Infinite when the
    /// in-distribution rate is zero but the held-out rate is not.
    pub fn ratio_over(&self, in_distribution_rate: f64) -> f64 {
        if in_distribution_rate > 0.0 {
            self.held_out_empty_set_rate / in_distribution_rate
        } else if self.held_out_empty_set_rate > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Everything computed for a report, kept in memory alongside the files.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub confusion: ConfusionMatrix,
    pub overall_accuracy: f64,
    /// Accuracy over anomaly-class test windows only; `None` when the test
    /// set has no anomaly windows.
    pub anomaly_accuracy: Option<f64>,
    pub marginal_coverage: f64,
    pub average_set_size: f64,
    pub empty_set_rate: f64,
    /// Per class: label, coverage (`None` when absent from the test set),
    /// and example count.
    pub per_class_coverage: Vec<(Label, Option<f64>, usize)>,
    pub earliness: EarlinessReport,
    /// Present when held-out unknown-class windows were provided.
    pub novelty: Option<NoveltyMetrics>,
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn confusion_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("class");
    for class in &matrix.classes {
        let _ = write!(out, ",{class}");
    }
    out.push('\n');
    for (i, class) in matrix.classes.iter().enumerate() {
        let _ = write!(out, "{class}");
        for j in 0..matrix.classes.len() {
            let _ = write!(out, ",{}", matrix.counts[[i, j]]);
        }
        out.push('\n');
    }
    out
}

fn confusion_normalized_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("class");
    for class in &matrix.classes {
        let _ = write!(out, ",{class}");
    }
    out.push('\n');
    for (class, row) in matrix.classes.iter().zip(matrix.normalized()) {
        let _ = write!(out, "{class}");
        match row {
            Some(values) => {
                for v in values {
                    let _ = write!(out, ",{v}");
                }
            }
            // A class with no test examples has an undefined row: empty cells.
            None => out.push_str(&",".repeat(matrix.classes.len())),
        }
        out.push('\n');
    }
    out
}

fn earliness_csv(entries: &[EarlinessEntry]) -> String {
    let mut out = String::from("record_id,class,method,first_detection_index,earliness_percent\n");
    for e in entries {
        let _ = write!(out, "{},{},{},", e.record_id, e.class, e.method);
        if let Some(d) = e.first_detection_index {
            let _ = write!(out, "{d}");
        }
        out.push(',');
        if let Some(p) = e.earliness_percent {
            let _ = write!(out, "{p}");
        }
        out.push('\n');
    }
    out
}

fn fmt_opt(value: Option<f64>, precision: usize) -> String {
    match value {
        Some(v) => format!("{v:.precision$}"),
        None => "n/a".to_string(),
    }
}

fn summary_text(bundle: &ReportBundle, calib: &CalibrationResult, test_len: usize) -> String {
    let mut out = String::from("trackguard evaluation summary\n");
    let classes: Vec<String> = bundle.confusion.classes.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "test_windows={test_len}");
    let _ = writeln!(out, "classes={}", classes.join("|"));
    let _ = writeln!(out, "overall_accuracy={:.4}", bundle.overall_accuracy);
    let _ = writeln!(out, "anomaly_accuracy={}", fmt_opt(bundle.anomaly_accuracy, 4));
    let _ = writeln!(out, "alpha={}", calib.alpha);
    let _ = writeln!(out, "q_hat={}", calib.q_hat);
    let _ = writeln!(out, "n_cal={}", calib.n_cal);
    let _ = writeln!(out, "saturated={}", calib.saturated);
    let _ = writeln!(out, "marginal_coverage={:.4}", bundle.marginal_coverage);
    let _ = writeln!(out, "average_set_size={:.4}", bundle.average_set_size);
    let _ = writeln!(out, "empty_set_rate={:.4}", bundle.empty_set_rate);
    let n_records = bundle
        .earliness
        .entries
        .iter()
        .filter(|e| e.method == DetectionMethod::Model)
        .count();
    let _ = writeln!(out, "earliness_records={n_records}");
    for method in [DetectionMethod::Model, DetectionMethod::Threshold] {
        let _ = writeln!(
            out,
            "mean_{method}_earliness_percent={}",
            fmt_opt(bundle.earliness.mean_earliness(method), 2)
        );
        let _ = writeln!(
            out,
            "{method}_detection_rate={}",
            fmt_opt(bundle.earliness.detection_rate(method), 4)
        );
    }
    if let Some(novelty) = &bundle.novelty {
        let _ = writeln!(out, "held_out_windows={}", novelty.held_out_windows);
        let _ = writeln!(
            out,
            "held_out_empty_set_rate={:.4}",
            novelty.held_out_empty_set_rate
        );
        let _ = writeln!(
            out,
            "novelty_ratio={:.4}",
            novelty.ratio_over(bundle.empty_set_rate)
        );
    }
    if !bundle.earliness.summary.is_empty() {
        let _ = writeln!(out, "per-class earliness (mean percent of span, detected/records):");
        for row in &bundle.earliness.summary {
            let _ = writeln!(
                out,
                "  {} {} mean={:.2} detected={}/{}",
                row.method, row.class, row.mean_earliness_percent, row.detected, row.records
            );
        }
    }
    out
}

/// Builds conformal prediction sets for every test window, paired with the
/// window's class index in the model's class order.
pub fn conformal_sets_for(
    model: &ClassifierModel,
    calib: &CalibrationResult,
    windows: &[PulseWindow],
) -> Result<(Vec<PredictionSet>, Vec<usize>)> {
    let sets = conformal_sets_unlabeled(model, calib, windows)?;
    let labels = windows
        .iter()
        .map(|w| model.class_index(w.label))
        .collect::<Result<Vec<usize>>>()?;
    Ok((sets, labels))
}

/// Prediction sets only, for windows whose labels may be outside the
/// model's class list (e.g. a held-out anomaly class).
pub fn conformal_sets_unlabeled(
    model: &ClassifierModel,
    calib: &CalibrationResult,
    windows: &[PulseWindow],
) -> Result<Vec<PredictionSet>> {
    let probs = predict_proba_batch(model, windows)?;
    probs
        .rows()
        .into_iter()
        .map(|row| predict_set(row.as_slice().expect("contiguous row"), calib))
        .collect()
}

/// Evaluates the model and both detectors, writes the five report files
/// under `report_dir`, and returns the computed metrics.
///
/// Files: `confusion_matrix.csv`, `confusion_matrix_normalized.csv`,
/// `coverage.csv`, `earliness.csv`, `summary.txt`. All output is a pure
/// function of the inputs. `held_out_windows` may be empty; when given,
/// their empty-set rate is reported as the unknown-anomaly diagnostic.
// Every argument is an independent ingredient of the report; bundling them
// into a one-use struct would only move the same list one level down.
#[allow(clippy::too_many_arguments)]
pub fn run_report(
    model: &ClassifierModel,
    calib: &CalibrationResult,
    test_windows: &[PulseWindow],
    held_out_windows: &[PulseWindow],
    earliness_records: &[(String, SignalRecord)],
    pre: &PreprocessConfig,
    eval: &EvalConfig,
    report_dir: &Path,
) -> Result<ReportBundle> {
    eval.validate()?;
    std::fs::create_dir_all(report_dir).map_err(|e| Error::io(report_dir, e))?;

    let (confusion, overall_accuracy) = evaluate_classifier(model, test_windows)?;
    let anomaly_accuracy = confusion.anomaly_accuracy().ok();

    let (sets, true_indices) = conformal_sets_for(model, calib, test_windows)?;
    let marginal = marginal_coverage(&sets, &true_indices)?;
    let per_class = class_conditional_coverage(&sets, &true_indices, model.num_classes())?;
    let avg_size = average_set_size(&sets)?;
    let empty_rate = empty_set_rate(&sets)?;
    let per_class_coverage: Vec<(Label, Option<f64>, usize)> = per_class
        .iter()
        .map(|c| (model.classes[c.class_index], c.coverage, c.n))
        .collect();

    let earliness = earliness_benchmark(earliness_records, model, calib, pre, eval)?;

    let novelty = if held_out_windows.is_empty() {
        None
    } else {
        let held_sets = conformal_sets_unlabeled(model, calib, held_out_windows)?;
        Some(NoveltyMetrics {
            held_out_windows: held_out_windows.len(),
            held_out_empty_set_rate: empty_set_rate(&held_sets)?,
        })
    };

    let bundle = ReportBundle {
        confusion,
        overall_accuracy,
        anomaly_accuracy,
        marginal_coverage: marginal,
        average_set_size: avg_size,
        empty_set_rate: empty_rate,
        per_class_coverage,
        earliness,
        novelty,
    };

    write_text(&report_dir.join(CONFUSION_FILE), &confusion_csv(&bundle.confusion))?;
    write_text(
        &report_dir.join(CONFUSION_NORMALIZED_FILE),
        &confusion_normalized_csv(&bundle.confusion),
    )?;
    let coverage_rows: Vec<(String, Option<f64>, usize)> = bundle
        .per_class_coverage
        .iter()
        .map(|(label, coverage, n)| (label.to_string(), *coverage, *n))
        .collect();
    write_coverage_csv(
        &coverage_rows,
        bundle.marginal_coverage,
        bundle.average_set_size,
        test_windows.len(),
        &report_dir.join(COVERAGE_FILE),
    )?;
    write_text(&report_dir.join(EARLINESS_FILE), &earliness_csv(&bundle.earliness.entries))?;
    write_text(
        &report_dir.join(SUMMARY_FILE),
        &summary_text(&bundle, calib, test_windows.len()),
    )?;
    Ok(bundle)
}

/// The five files `run_report` writes, in emission order.
pub fn report_files(report_dir: &Path) -> Vec<PathBuf> {
    [
        CONFUSION_FILE,
        CONFUSION_NORMALIZED_FILE,
        COVERAGE_FILE,
        EARLINESS_FILE,
        SUMMARY_FILE,
    ]
    .iter()
    .map(|f| report_dir.join(f))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::train::{split_windows, train, TrainConfig};
    use crate::conformal::{calibrate, conformity_scores};
    use crate::preprocess::preprocess_record;
    use crate::signalgen::{anomaly_class, generate_record, GeneratorConfig};
    use ndarray::Array2;

    struct Fixture {
        model: ClassifierModel,
        calib: CalibrationResult,
        test_windows: Vec<PulseWindow>,
        records: Vec<(String, SignalRecord)>,
        pre: PreprocessConfig,
        eval: EvalConfig,
    }

    /// Small but real end-to-end fixture: 2 anomaly classes + nominal,
    /// short records, a tiny network.
    fn fixture() -> Fixture {
        let config = GeneratorConfig {
            nominal_lead_samples: 128,
            anomaly_samples: 256,
            nominal_tail_samples: 32,
            ..GeneratorConfig::default()
        };
        let pre = PreprocessConfig { window_len: 32, stride: 8, ..PreprocessConfig::default() };
        let classes = [anomaly_class(4).unwrap(), anomaly_class(10).unwrap()];
        let mut windows = Vec::new();
        let mut records = Vec::new();
        for (c, class) in classes.iter().enumerate() {
            for i in 0..6 {
                let seed = (100 * c + i) as u64;
                let record = generate_record(Some(class), &config, seed).unwrap();
                let id = format!("anomaly{:02}_rec{i:03}", class.id);
                windows.extend(preprocess_record(&record, &pre, &id).unwrap());
                records.push((id, record));
            }
        }
        for i in 0..6 {
            let record = generate_record(None, &config, 900 + i).unwrap();
            let id = format!("nominal_rec{i:03}");
            windows.extend(preprocess_record(&record, &pre, &id).unwrap());
        }
        let tc = TrainConfig {
            epochs: 12,
            hidden: vec![16],
            seed: 5,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let (model, _log) = train(&windows, &tc).unwrap();
        let splits = split_windows(&windows, &tc).unwrap();
        let probs = crate::classifier::predict_proba_batch(&model, &splits.calibration).unwrap();
        let labels: Vec<usize> = splits
            .calibration
            .iter()
            .map(|w| model.class_index(w.label).unwrap())
            .collect();
        let scores = conformity_scores(&probs, &labels).unwrap();
        let calib = calibrate(&scores, 0.1).unwrap();
        let anomaly_records: Vec<(String, SignalRecord)> = records
            .into_iter()
            .filter(|(id, _)| {
                // keep only records that did not contribute training windows
                !splits.train.iter().any(|w| w.source_id == *id)
            })
            .collect();
        Fixture {
            model,
            calib,
            test_windows: splits.test,
            records: anomaly_records,
            pre,
            eval: EvalConfig::default(),
        }
    }

    #[test]
    fn report_writes_consistent_files_and_reruns_are_byte_identical() {
        let f = fixture();
        assert!(!f.test_windows.is_empty());
        assert!(!f.records.is_empty(), "need held-out records for earliness");
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_report(
            &f.model,
            &f.calib,
            &f.test_windows,
            &[],
            &f.records,
            &f.pre,
            &f.eval,
            dir.path(),
        )
        .unwrap();
        assert!(bundle.novelty.is_none());

        let paths = report_files(dir.path());
        let first: Vec<String> = paths
            .iter()
            .map(|p| std::fs::read_to_string(p).unwrap())
            .collect();

        // Confusion CSV counts must reproduce the in-memory matrix and the
        // stated accuracy exactly.
        let conf = &first[0];
        let mut lines = conf.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header.split(',').count(),
            f.model.num_classes() + 1,
            "confusion header must list every class"
        );
        let mut grid = Array2::<u64>::zeros((f.model.num_classes(), f.model.num_classes()));
        for (i, line) in lines.enumerate() {
            for (j, cell) in line.split(',').skip(1).enumerate() {
                grid[[i, j]] = cell.parse().unwrap();
            }
        }
        assert_eq!(grid, bundle.confusion.counts);
        assert_eq!(grid.sum() as usize, f.test_windows.len());

        // Normalized rows sum to 1 within 1e-12 (defined rows only).
        for line in first[1].lines().skip(1) {
            let cells: Vec<&str> = line.split(',').skip(1).collect();
            if cells.iter().all(|c| c.is_empty()) {
                continue;
            }
            let sum: f64 = cells.iter().map(|c| c.parse::<f64>().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
        }

        // Earliness CSV has one model and one threshold row per record.
        let earliness_lines = first[3].lines().count() - 1;
        assert_eq!(earliness_lines, 2 * f.records.len());

        // Summary repeats the headline numbers.
        assert!(first[4].contains(&format!("overall_accuracy={:.4}", bundle.overall_accuracy)));
        assert!(first[4].contains(&format!("n_cal={}", f.calib.n_cal)));

        // Rerun into a second directory: byte-identical artifacts.
        let dir2 = tempfile::tempdir().unwrap();
        run_report(
            &f.model,
            &f.calib,
            &f.test_windows,
            &[],
            &f.records,
            &f.pre,
            &f.eval,
            dir2.path(),
        )
        .unwrap();
        for (p1, p2) in paths.iter().zip(report_files(dir2.path())) {
            assert_eq!(
                std::fs::read(p1).unwrap(),
                std::fs::read(&p2).unwrap(),
                "rerun of {} differed",
                p1.file_name().unwrap().to_string_lossy()
            );
        }
    }

    #[test]
    fn coverage_rows_cover_every_model_class_and_novelty_is_reported() {
        let f = fixture();
        // Windows from a class the model never saw act as the unknown pool.
        let config = GeneratorConfig {
            nominal_lead_samples: 128,
            anomaly_samples: 256,
            nominal_tail_samples: 32,
            ..GeneratorConfig::default()
        };
        let unknown = anomaly_class(7).unwrap();
        let mut held_out = Vec::new();
        for i in 0..2 {
            let record = generate_record(Some(&unknown), &config, 700 + i).unwrap();
            held_out.extend(preprocess_record(&record, &f.pre, "held").unwrap());
        }
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_report(
            &f.model,
            &f.calib,
            &f.test_windows,
            &held_out,
            &f.records,
            &f.pre,
            &f.eval,
            dir.path(),
        )
        .unwrap();
        assert_eq!(bundle.per_class_coverage.len(), f.model.num_classes());
        let body = std::fs::read_to_string(dir.path().join(COVERAGE_FILE)).unwrap();
        assert!(body.starts_with("class,coverage,n\n"));
        assert!(body.contains("\nmarginal,"));
        assert!(body.contains("\naverage_set_size,"));
        // With alpha = 0.1 and an easy 3-class problem, coverage should not
        // collapse; this is a sanity bound, not the acceptance criterion.
        assert!(bundle.marginal_coverage > 0.6, "coverage {}", bundle.marginal_coverage);
        let novelty = bundle.novelty.expect("held-out windows were provided");
        assert_eq!(novelty.held_out_windows, held_out.len());
        let summary = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert!(summary.contains("held_out_empty_set_rate="));
        assert!(summary.contains("novelty_ratio="));
    }
}
