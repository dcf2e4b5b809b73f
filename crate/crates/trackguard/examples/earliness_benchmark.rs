//! Measures how early in a fault's development each detector first commits
//! to the right diagnosis, comparing the classifier (conformal-singleton
//! rule) against a classic amplitude-threshold monitor.
//!
//! Earliness is the first-detection position as a percentage of the
//! degradation span: 0 % means "flagged at onset", 100 % means "only at the
//! critical point" (missed detections score 100 %). Both detectors use the
//! same persistence rule — `m` consecutive agreeing windows — so the
//! comparison isolates *what* each one can see, not how trigger-happy it is.
//!
//! Run with: `cargo run --example earliness_benchmark`

use trackguard::classifier::train::{split_windows, train, TrainConfig};
use trackguard::classifier::predict_proba_batch;
use trackguard::conformal::{calibrate, conformity_scores};
use trackguard::evaluation::earliness::{earliness_benchmark, DetectionMethod};
use trackguard::evaluation::EvalConfig;
use trackguard::preprocess::{preprocess_record, PreprocessConfig};
use trackguard::seed::derive_seed;
use trackguard::signalgen::{default_catalog, generate_record, GeneratorConfig};
use trackguard::{PulseWindow, SignalRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generator = GeneratorConfig {
        nominal_lead_samples: 200,
        anomaly_samples: 600,
        nominal_tail_samples: 100,
        ..GeneratorConfig::default()
    };
    let pre = PreprocessConfig::default();
    let seed = 5;
    let catalog = default_catalog();

    // Train and calibrate on one set of records...
    let mut windows: Vec<PulseWindow> = Vec::new();
    for class in &catalog {
        for i in 0..24 {
            let id = format!("a{:02}-{i}", class.id);
            let record = generate_record(Some(class), &generator, derive_seed(seed, &id))?;
            windows.extend(preprocess_record(&record, &pre, &id)?);
        }
    }
    for i in 0..24 {
        let id = format!("nom-{i}");
        let record = generate_record(None, &generator, derive_seed(seed, &id))?;
        windows.extend(preprocess_record(&record, &pre, &id)?);
    }
    let config = TrainConfig {
        epochs: 60,
        hidden: vec![64],
        seed: derive_seed(seed, "train"),
        ..TrainConfig::default()
    };
    println!("training on {} windows...", windows.len());
    let (model, _) = train(&windows, &config)?;
    let splits = split_windows(&windows, &config)?;
    let cal_probs = predict_proba_batch(&model, &splits.calibration)?;
    let cal_labels: Vec<usize> = splits
        .calibration
        .iter()
        .map(|w| model.class_index(w.label))
        .collect::<trackguard::Result<_>>()?;
    let calib = calibrate(&conformity_scores(&cal_probs, &cal_labels)?, 0.01)?;
    println!("calibrated: q-hat {:.4}\n", calib.q_hat);

    // ...then benchmark on records the model has never seen (fresh seeds),
    // a handful per class.
    let mut bench: Vec<(String, SignalRecord)> = Vec::new();
    for class in &catalog {
        for i in 0..4 {
            let id = format!("bench-a{:02}-{i}", class.id);
            let record = generate_record(Some(class), &generator, derive_seed(seed, &id))?;
            bench.push((id, record));
        }
    }
    let eval = EvalConfig::default();
    println!(
        "benchmark: {} unseen records; baseline flags a window when a channel \
         mean drifts more than {}σ from its nominal level; persistence m = {}\n",
        bench.len(),
        eval.k,
        eval.m
    );
    let report = earliness_benchmark(&bench, &model, &calib, &pre, &eval)?;

    println!(
        "class      envelope                model-earliness  threshold-earliness  (mean %, lower = earlier)"
    );
    for class in &catalog {
        let row = |method| {
            report
                .summary
                .iter()
                .find(|r| r.method == method && r.class.to_string() == format!("Anomaly{}", class.id))
                .map_or(f64::NAN, |r| r.mean_earliness_percent)
        };
        println!(
            "Anomaly{:<3} {:<22}  {:>15.1}  {:>19.1}",
            class.id,
            format!("{:?}", class.envelope_kind),
            row(DetectionMethod::Model),
            row(DetectionMethod::Threshold)
        );
    }
    for method in [DetectionMethod::Model, DetectionMethod::Threshold] {
        println!(
            "{:<9} overall: mean earliness {:>5.1} %, detection rate {:.0} %",
            method.to_string(),
            report.mean_earliness(method).unwrap_or(f64::NAN),
            100.0 * report.detection_rate(method).unwrap_or(f64::NAN)
        );
    }

    println!(
        "\nThe classifier keys on the faint class-signature ripple, which rises \
         above the noise floor long before the channel mean drifts past 3σ, so \
         it commits near onset. The threshold monitor must wait for gross \
         amplitude loss — and barely-deviating intermittent faults can slip \
         past it entirely (scored 100 %). A class the reduced model confuses \
         with a near twin earns a late singleton (its set stays wider for \
         longer); the full-scale defaults close that gap too."
    );
    Ok(())
}
