//! Detects an anomaly class the classifier was never trained on.
//!
//! The class catalog holds eleven fault types but only ten are trained;
//! class 6 is held out to play the role of a failure mode missing from the
//! historical record. A plain classifier is forced to pick one of the
//! labels it knows. Conformal prediction sets have a third option: come
//! back *empty* when no known class fits, and that empty-set signal fires
//! far more often on the unknown class than on known traffic.
//!
//! This example runs the full shipped pipeline, so it takes about a minute.
//!
//! Run with: `cargo run --release --example unknown_anomaly`

use std::time::Instant;

use tempfile::TempDir;
use trackguard::classifier::io::load_model;
use trackguard::classifier::predict_proba_batch;
use trackguard::config::RunConfig;
use trackguard::conformal::{predict_set, CalibrationResult};
use trackguard::pipeline::{
    cmd_calibrate, cmd_evaluate, cmd_generate, cmd_train, HELD_OUT_DIR,
};
use trackguard::preprocess::preprocess_record;
use trackguard::signalgen::csv::read_csv;
use trackguard::signalgen::{held_out_class, DatasetManifest, MANIFEST_FILE_NAME};
use trackguard::{Label, PulseWindow};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = TempDir::new()?;
    let config = RunConfig::with_standard_layout(root.path());

    let unknown = held_out_class();
    println!("held-out class {}: {}", unknown.id, unknown.description);
    println!(
        "  intermittent envelope on the upstream channel, signature at {:.4} \
         cycles/sample — half-way between two trained upstream signatures, so \
         its spectral evidence matches neither cleanly\n",
        unknown.signature_freq
    );

    let t = Instant::now();
    let gen = cmd_generate(&config)?;
    let held_count = gen.held_out_manifest.as_ref().map_or(0, |m| m.records.len());
    println!(
        "[{:>5.1}s] generated {} training-catalog records and {} held-out records",
        t.elapsed().as_secs_f64(),
        gen.manifest.records.len(),
        held_count
    );
    let train_out = cmd_train(&config)?;
    println!(
        "[{:>5.1}s] trained: final holdout accuracy {:.4}",
        t.elapsed().as_secs_f64(),
        train_out.log.last().map_or(0.0, |e| e.holdout_accuracy)
    );
    let calib_out = cmd_calibrate(&config)?;
    println!(
        "[{:>5.1}s] calibrated: alpha {}, q-hat {:.4} -> probability threshold {:.4}",
        t.elapsed().as_secs_f64(),
        calib_out.calibration.alpha,
        calib_out.calibration.q_hat,
        1.0 - calib_out.calibration.q_hat
    );
    let report = cmd_evaluate(&config)?;
    println!("[{:>5.1}s] evaluated\n", t.elapsed().as_secs_f64());

    let novelty = report.novelty.expect("held-out records were generated");
    println!(
        "empty-set rate on known-class test windows:   {:>6.2}%",
        100.0 * report.empty_set_rate
    );
    println!(
        "empty-set rate on unknown-class windows:      {:>6.2}%  ({} windows)",
        100.0 * novelty.held_out_empty_set_rate,
        novelty.held_out_windows
    );
    println!(
        "ratio: {:.1}x more frequent on the unknown class\n",
        novelty.ratio_over(report.empty_set_rate)
    );

    // Reload the held-out windows to look inside: how does the signal
    // develop over the fault, and what does the posterior of an empty-set
    // window look like?
    let model = load_model(&config.paths.model_path)?;
    let calibration = CalibrationResult::load(&config.paths.calib_path)?;
    let held_dir = config.paths.data_dir.join(HELD_OUT_DIR);
    let manifest = DatasetManifest::load(&held_dir.join(MANIFEST_FILE_NAME))?;
    let mut held: Vec<PulseWindow> = Vec::new();
    for entry in &manifest.records {
        let record = read_csv(&held_dir.join(&entry.path))?;
        held.extend(preprocess_record(&record, &config.preprocess, &entry.path)?);
    }
    held.retain(|w| w.label != Label::Nominal);
    let probs = predict_proba_batch(&model, &held)?;

    println!("empty-set rate by stage of the unknown fault:");
    for (name, lo, hi) in [("early", 0.0, 1.0 / 3.0), ("mid", 1.0 / 3.0, 2.0 / 3.0), ("late", 2.0 / 3.0, 1.01)] {
        let mut empty = 0usize;
        let mut total = 0usize;
        for (i, w) in held.iter().enumerate() {
            let stage = w.stage_fraction.expect("degradation window");
            if stage < lo || stage >= hi {
                continue;
            }
            total += 1;
            let set = predict_set(probs.row(i).as_slice().unwrap(), &calibration)?;
            empty += usize::from(set.is_empty());
        }
        println!("  {name:<5} {:>6.2}%  ({total} windows)", 100.0 * empty as f64 / total as f64);
    }

    // Show the posterior of one empty-set window: probability mass smeared
    // over several known classes, none clearing the threshold.
    let empty_idx = (0..held.len()).find(|&i| {
        predict_set(probs.row(i).as_slice().unwrap(), &calibration)
            .map(|s| s.is_empty())
            .unwrap_or(false)
    });
    if let Some(i) = empty_idx {
        let row = probs.row(i);
        let mut ranked: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let top: Vec<String> = ranked
            .iter()
            .take(3)
            .map(|&(y, p)| format!("{} {:.3}", model.classes[y], p))
            .collect();
        println!(
            "\nanatomy of one empty set (stage {:.2}): top probabilities {} — \
             all below the {:.3} threshold, so the set rejects every known label.",
            held[i].stage_fraction.unwrap(),
            top.join(", "),
            1.0 - calibration.q_hat
        );
    }
    println!(
        "\nA monitoring system can treat a burst of empty sets as \"something \
         new is happening\" and escalate to a human instead of mislabeling \
         the fault as the nearest known class."
    );
    Ok(())
}
