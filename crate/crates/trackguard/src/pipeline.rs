//! Stage drivers: each `cmd_*` function is one pipeline stage working
//! purely from a [`RunConfig`], reading and writing the files named in its
//! `[paths]` section. The thin command-line binary maps subcommands onto
//! these; examples and tests call them directly.
//!
//! Every stage derives its randomness from the config's single `seed`, so
//! rerunning any stage with the same config reproduces its artifacts
//! byte for byte.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::classifier::io::{load_model, save_model, write_training_log};
use crate::classifier::train::{split_windows, train, TrainConfig, TrainLogEntry};
use crate::classifier::{predict_proba_batch, ClassifierModel};
use crate::config::RunConfig;
use crate::conformal::{calibrate, conformity_scores, predict_set, CalibrationResult};
use crate::error::{Error, Result};
use crate::evaluation::report::{run_report, ReportBundle};
use crate::preprocess::{preprocess_record, PulseWindow};
use crate::seed::derive_seed;
use crate::signalgen::csv::read_csv;
use crate::signalgen::{
    default_catalog, generate_dataset, held_out_class, DatasetManifest, Label, SignalRecord,
    MANIFEST_FILE_NAME,
};

/// Subdirectory of `data_dir` holding the held-out-class records.
pub const HELD_OUT_DIR: &str = "held_out";
/// Training log CSV written next to the model file.
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
/// Lock file guarding a report directory against concurrent evaluation.
pub const LOCK_FILE: &str = ".trackguard-lock";

fn source_id(entry_path: &str) -> String {
    Path::new(entry_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry_path.to_string())
}

fn ensure_parent_dir(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    Ok(())
}

/// Loads every record of the dataset in manifest order.
pub fn load_records(config: &RunConfig) -> Result<Vec<(String, SignalRecord)>> {
    let dir = &config.paths.data_dir;
    let manifest = DatasetManifest::load(&dir.join(MANIFEST_FILE_NAME))?;
    manifest
        .records
        .iter()
        .map(|entry| Ok((source_id(&entry.path), read_csv(&dir.join(&entry.path))?)))
        .collect()
}

/// Windows every record with the config's preprocessing, keeping record
/// order (and window order within a record).
pub fn windows_from_records(
    records: &[(String, SignalRecord)],
    config: &RunConfig,
) -> Result<Vec<PulseWindow>> {
    let mut windows = Vec::new();
    for (id, record) in records {
        windows.extend(preprocess_record(record, &config.preprocess, id)?);
    }
    Ok(windows)
}

/// The `[train]` section with its seed replaced by a stream derived from
/// the run's master seed, so one config knob controls all randomness.
pub fn effective_train_config(config: &RunConfig) -> TrainConfig {
    TrainConfig { seed: derive_seed(config.seed, "train"), ..config.train.clone() }
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub manifest: DatasetManifest,
    pub held_out_manifest: Option<DatasetManifest>,
}

/// Generates the catalog dataset (plus nominal records) into `data_dir`
/// and, when configured, the held-out-class records into
/// `data_dir/held_out/` under a seed stream of their own.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateOutcome> {
    config.validate()?;
    let manifest = generate_dataset(
        &config.generator,
        &default_catalog(),
        config.dataset.records_per_class,
        config.dataset.nominal_records,
        config.seed,
        &config.paths.data_dir,
    )?;
    let held_out_manifest = if config.dataset.held_out_records > 0 {
        Some(generate_dataset(
            &config.generator,
            &[held_out_class()],
            config.dataset.held_out_records,
            0,
            derive_seed(config.seed, "held-out"),
            &config.paths.data_dir.join(HELD_OUT_DIR),
        )?)
    } else {
        None
    };
    Ok(GenerateOutcome { manifest, held_out_manifest })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub log: Vec<TrainLogEntry>,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
}

/// Trains the classifier on the dataset's training split and writes the
/// model plus its per-epoch log.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let records = load_records(config)?;
    let windows = windows_from_records(&records, config)?;
    let tc = effective_train_config(config);
    let (model, log) = train(&windows, &tc)?;
    let model_path = config.paths.model_path.clone();
    ensure_parent_dir(&model_path)?;
    save_model(&model, &model_path)?;
    let log_path = model_path
        .parent()
        .map(|p| p.join(TRAINING_LOG_FILE))
        .unwrap_or_else(|| PathBuf::from(TRAINING_LOG_FILE));
    write_training_log(&log, &log_path)?;
    Ok(TrainOutcome { model, log, model_path, log_path })
}

#[derive(Debug, Clone)]
pub struct CalibrateOutcome {
    pub calibration: CalibrationResult,
    pub calib_path: PathBuf,
}

/// Scores the calibration split with the trained model and computes the
/// conformal threshold for the configured `alpha`.
pub fn cmd_calibrate(config: &RunConfig) -> Result<CalibrateOutcome> {
    config.validate()?;
    let model = load_model(&config.paths.model_path)?;
    let records = load_records(config)?;
    let windows = windows_from_records(&records, config)?;
    let splits = split_windows(&windows, &effective_train_config(config))?;
    if splits.calibration.is_empty() {
        return Err(Error::domain(
            "the calibration split is empty; increase the dataset or the calibration fraction",
        ));
    }
    let probs = predict_proba_batch(&model, &splits.calibration)?;
    let labels = splits
        .calibration
        .iter()
        .map(|w| model.class_index(w.label))
        .collect::<Result<Vec<usize>>>()?;
    let scores = conformity_scores(&probs, &labels)?;
    let calibration = calibrate(&scores, config.conformal.alpha)?;
    let calib_path = config.paths.calib_path.clone();
    ensure_parent_dir(&calib_path)?;
    calibration.save(&calib_path)?;
    Ok(CalibrateOutcome { calibration, calib_path })
}

/// Holds the report-directory lock for the lifetime of an evaluation; the
/// lock file is removed on drop.
pub struct ReportLock {
    path: PathBuf,
}

impl ReportLock {
    pub fn acquire(report_dir: &Path) -> Result<ReportLock> {
        std::fs::create_dir_all(report_dir).map_err(|e| Error::io(report_dir, e))?;
        let path = report_dir.join(LOCK_FILE);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(ReportLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Io {
                path: path.clone(),
                source: std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "another evaluation holds the report lock (delete the file if stale)",
                ),
            }),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for ReportLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Evaluates the trained, calibrated pipeline: confusion and coverage
/// diagnostics on the test split, the earliness benchmark on every
/// non-training anomalous record, and — when held-out records exist —
/// the unknown-anomaly empty-set diagnostic. Writes the report files
/// under `report_dir`, guarded by a lock file.
pub fn cmd_evaluate(config: &RunConfig) -> Result<ReportBundle> {
    config.validate()?;
    let model = load_model(&config.paths.model_path)?;
    let calibration = CalibrationResult::load(&config.paths.calib_path)?;
    let records = load_records(config)?;
    let windows = windows_from_records(&records, config)?;
    let splits = split_windows(&windows, &effective_train_config(config))?;
    if splits.test.is_empty() {
        return Err(Error::domain(
            "the test split is empty; increase the dataset or the test fraction",
        ));
    }

    let train_sources: BTreeSet<&str> =
        splits.train.iter().map(|w| w.source_id.as_str()).collect();
    let earliness_records: Vec<(String, SignalRecord)> = records
        .iter()
        .filter(|(id, record)| {
            record.label != Label::Nominal && !train_sources.contains(id.as_str())
        })
        .cloned()
        .collect();

    let held_manifest_path = config.paths.data_dir.join(HELD_OUT_DIR).join(MANIFEST_FILE_NAME);
    let held_out_windows: Vec<PulseWindow> = if held_manifest_path.exists() {
        let held_dir = config.paths.data_dir.join(HELD_OUT_DIR);
        let manifest = DatasetManifest::load(&held_manifest_path)?;
        let mut pool = Vec::new();
        for entry in &manifest.records {
            let record = read_csv(&held_dir.join(&entry.path))?;
            pool.extend(preprocess_record(&record, &config.preprocess, &source_id(&entry.path))?);
        }
        // Only windows inside the degradation span carry the held-out
        // label; the nominal lead/tail windows are not novelty probes.
        pool.retain(|w| w.label != Label::Nominal);
        pool
    } else {
        Vec::new()
    };

    let _lock = ReportLock::acquire(&config.paths.report_dir)?;
    run_report(
        &model,
        &calibration,
        &splits.test,
        &held_out_windows,
        &earliness_records,
        &config.preprocess,
        &config.evaluation,
        &config.paths.report_dir,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictSummary {
    pub windows: usize,
    pub empty_sets: usize,
    pub mean_set_size: f64,
}

/// Streams per-window prediction sets for one record CSV.
///
/// Output format (deterministic):
///
/// ```text
/// # trackguard-predict v1
/// # classes=Nominal|Anomaly1|...
/// start_index,prediction_set,probabilities
/// 0,Nominal,0.98|0.002|...
/// 16,,0.41|0.38|...            <- empty set: unknown-anomaly signal
/// # windows=109 empty_sets=1 mean_set_size=1.0092
/// ```
pub fn cmd_predict(
    config: &RunConfig,
    input: &Path,
    out: &mut dyn std::io::Write,
) -> Result<PredictSummary> {
    config.validate()?;
    let model = load_model(&config.paths.model_path)?;
    let calibration = CalibrationResult::load(&config.paths.calib_path)?;
    let record = read_csv(input)?;
    let id = source_id(&input.to_string_lossy());
    let windows = preprocess_record(&record, &config.preprocess, &id)?;
    let probs = predict_proba_batch(&model, &windows)?;

    let emit = |e: std::io::Error| Error::io(Path::new("<output>"), e);
    writeln!(out, "# trackguard-predict v1").map_err(emit)?;
    let class_names: Vec<String> = model.classes.iter().map(|c| c.to_string()).collect();
    writeln!(out, "# classes={}", class_names.join("|")).map_err(emit)?;
    writeln!(out, "start_index,prediction_set,probabilities").map_err(emit)?;

    let mut empty_sets = 0usize;
    let mut size_sum = 0usize;
    for (window, row) in windows.iter().zip(probs.rows()) {
        let set = predict_set(row.as_slice().expect("contiguous row"), &calibration)?;
        if set.is_empty() {
            empty_sets += 1;
        }
        size_sum += set.len();
        let labels: Vec<String> =
            set.labels.iter().map(|&i| model.classes[i].to_string()).collect();
        let probabilities: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        writeln!(
            out,
            "{},{},{}",
            window.start_index,
            labels.join("|"),
            probabilities.join("|")
        )
        .map_err(emit)?;
    }
    let summary = PredictSummary {
        windows: windows.len(),
        empty_sets,
        mean_set_size: if windows.is_empty() {
            0.0
        } else {
            size_sum as f64 / windows.len() as f64
        },
    };
    writeln!(
        out,
        "# windows={} empty_sets={} mean_set_size={:.4}",
        summary.windows, summary.empty_sets, summary.mean_set_size
    )
    .map_err(emit)?;
    Ok(summary)
}
