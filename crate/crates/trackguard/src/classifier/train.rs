//! Seeded training: dataset splitting, exact backpropagation, and plain
//! mini-batch gradient descent.
//!
//! Splitting happens at two granularities. Training windows are assigned
//! per source record (stratified by record label), so no record
//! contributes windows to both the training set and an evaluation set.
//! The remaining records' windows are then pooled and split at window
//! level into calibration and test sets — an exchangeable draw from one
//! distribution, which is what the conformal coverage guarantee needs.
//!
//! The loss is mean cross-entropy plus `l2/2 * ||W||^2` over weight
//! matrices (biases are not decayed). Gradients are exact reverse-mode
//! derivatives; `loss_and_gradients` is verified against central finite
//! differences in the tests.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax_rows, windows_matrix, Activation, ClassifierModel};
use crate::error::{Error, Result};
use crate::preprocess::PulseWindow;
use crate::seed::derive_seed;
use crate::signalgen::Label;

/// Training hyperparameters and split layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Weight-decay coefficient applied to weight matrices only.
    pub l2: f64,
    /// `(train, calibration, test)` fractions; must sum to 1.
    pub split: (f64, f64, f64),
    /// Hidden layer widths of the classifier.
    pub hidden: Vec<usize>,
    /// When true, each epoch draws an equal number of windows per class
    /// (a fresh seeded subsample of the larger classes every epoch), so
    /// the majority class cannot dominate the decision boundary.
    pub balance_classes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.15,
            batch_size: 64,
            epochs: 150,
            seed: 0,
            l2: 1e-4,
            split: (0.6, 0.2, 0.2),
            hidden: vec![128, 64],
            balance_classes: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(format!(
                "learning_rate must be non-negative and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::config(format!(
                "l2 must be non-negative and finite, got {}",
                self.l2
            )));
        }
        let (a, b, c) = self.split;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::config(format!(
                "split fractions must all be positive, got ({a}, {b}, {c})"
            )));
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "split fractions must sum to 1, got ({a}, {b}, {c})"
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

/// Output of [`split_windows`].
#[derive(Debug, Clone)]
pub struct WindowSplits {
    pub train: Vec<PulseWindow>,
    pub calibration: Vec<PulseWindow>,
    pub test: Vec<PulseWindow>,
}

/// Record label of each source: the anomaly class any of its windows
/// carries, else Nominal.
fn record_labels(windows: &[PulseWindow]) -> BTreeMap<&str, Label> {
    let mut labels: BTreeMap<&str, Label> = BTreeMap::new();
    for w in windows {
        let entry = labels.entry(&w.source_id).or_insert(Label::Nominal);
        if w.label != Label::Nominal {
            *entry = w.label;
        }
    }
    labels
}

/// Deterministically partitions windows into train/calibration/test per
/// the config's fractions and seed (see the module docs for the
/// record-level vs window-level granularity).
pub fn split_windows(windows: &[PulseWindow], config: &TrainConfig) -> Result<WindowSplits> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::domain("cannot split an empty window list"));
    }

    // Stratified record-level draw for the training set.
    let labels = record_labels(windows);
    let mut by_label: BTreeMap<Label, Vec<&str>> = BTreeMap::new();
    for (&source, &label) in &labels {
        by_label.entry(label).or_default().push(source);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "split/records"));
    let mut train_sources = std::collections::BTreeSet::new();
    for sources in by_label.values_mut() {
        sources.shuffle(&mut rng);
        let n_train = (config.split.0 * sources.len() as f64).round() as usize;
        train_sources.extend(sources.iter().take(n_train).copied());
    }

    let mut train = Vec::new();
    let mut pool = Vec::new();
    for w in windows {
        if train_sources.contains(w.source_id.as_str()) {
            train.push(w.clone());
        } else {
            pool.push(w.clone());
        }
    }

    // Window-level draw for calibration vs test.
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "split/windows"));
    pool.shuffle(&mut rng);
    let cal_frac = config.split.1 / (config.split.1 + config.split.2);
    let n_cal = (cal_frac * pool.len() as f64).round() as usize;
    let test = pool.split_off(n_cal);
    Ok(WindowSplits { train, calibration: pool, test })
}

/// Per-layer gradients, same shapes as the model parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Mean cross-entropy loss (plus the l2 penalty) and its exact gradients
/// for one batch. `labels` are class indices into the model's class list.
pub fn loss_and_gradients(
    model: &ClassifierModel,
    batch: &Array2<f64>,
    labels: &[usize],
    l2: f64,
) -> Result<(f64, Gradients)> {
    if batch.nrows() == 0 {
        return Err(Error::domain("loss requires a non-empty batch"));
    }
    if batch.nrows() != labels.len() {
        return Err(Error::domain(format!(
            "batch has {} rows but {} labels",
            batch.nrows(),
            labels.len()
        )));
    }
    let num_classes = model.num_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::domain(format!(
            "label index {bad} out of range for {num_classes} classes"
        )));
    }

    let trace = model.forward_trace(batch)?;
    let probs = softmax_rows(trace.last().expect("at least one layer"));
    let n = batch.nrows() as f64;

    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs[[i, y]].max(f64::MIN_POSITIVE).ln();
    }
    loss /= n;
    for w in &model.weights {
        loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    }

    // delta starts as d(loss)/d(logits) = (probs - onehot) / n.
    let mut delta = probs;
    for (i, &y) in labels.iter().enumerate() {
        delta[[i, y]] -= 1.0;
    }
    delta.mapv_inplace(|v| v / n);

    let layers = model.arch.len();
    let mut g_weights = vec![Array2::zeros((0, 0)); layers];
    let mut g_biases = vec![Array1::zeros(0); layers];
    for k in (0..layers).rev() {
        let input = if k == 0 { batch } else { &trace[k - 1] };
        g_weights[k] = input.t().dot(&delta) + &model.weights[k].mapv(|v| l2 * v);
        g_biases[k] = delta.sum_axis(Axis(0));
        if k > 0 {
            let mut back = delta.dot(&model.weights[k].t());
            if model.arch[k - 1].activation == Activation::ReLU {
                // Post-activation output is positive exactly where the
                // pre-activation was, so it doubles as the ReLU mask.
                back.zip_mut_with(&trace[k - 1], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = back;
        }
    }
    Ok((loss, Gradients { weights: g_weights, biases: g_biases }))
}

/// One gradient-descent step: `param -= learning_rate * gradient`.
pub fn apply_gradients(model: &mut ClassifierModel, grads: &Gradients, learning_rate: f64) {
    for (w, g) in model.weights.iter_mut().zip(&grads.weights) {
        w.scaled_add(-learning_rate, g);
    }
    for (b, g) in model.biases.iter_mut().zip(&grads.biases) {
        b.scaled_add(-learning_rate, g);
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_accuracy: f64,
}

/// Fraction of rows whose argmax prediction matches the label.
fn batch_accuracy(model: &ClassifierModel, inputs: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(f64::NAN);
    }
    let logits = model.forward(inputs)?;
    let correct = logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(row.as_slice().expect("contiguous row")) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

fn class_indices(windows: &[PulseWindow], model: &ClassifierModel) -> Result<Vec<usize>> {
    windows.iter().map(|w| model.class_index(w.label)).collect()
}

/// Trains a classifier on the training portion of `windows`.
///
/// The dataset is split internally via [`split_windows`] (same seed, same
/// result — callers re-split to obtain the calibration and test sets).
/// The calibration split serves as the held-out accuracy monitor in the
/// returned log; it is never trained on, and monitoring does not alter its
/// later conformal use. With `balance_classes` set, every epoch trains on
/// an equal-sized seeded subsample of each class instead of the full
/// (typically nominal-heavy) training set.
pub fn train(
    windows: &[PulseWindow],
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<TrainLogEntry>)> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::domain("cannot train on an empty dataset"));
    }
    let mut classes: Vec<Label> = windows.iter().map(|w| w.label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::domain("training data must contain at least 2 classes"));
    }

    let splits = split_windows(windows, config)?;
    for &class in &classes {
        if !splits.train.iter().any(|w| w.label == class) {
            return Err(Error::config(format!(
                "class {class} has no training windows after the split"
            )));
        }
    }

    let input_dim = windows[0].cat.len() + windows[0].cal.len();
    let mut model = ClassifierModel::init(
        input_dim,
        &config.hidden,
        classes,
        derive_seed(config.seed, "init"),
    )?;

    let train_inputs = windows_matrix(&splits.train)?;
    let train_labels = class_indices(&splits.train, &model)?;
    let (holdout_inputs, holdout_labels) = if splits.calibration.is_empty() {
        (Array2::zeros((0, input_dim)), Vec::new())
    } else {
        (windows_matrix(&splits.calibration)?, class_indices(&splits.calibration, &model)?)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "train"));
    // Per-class index pools drive the balanced epoch draw; with balancing
    // off there is a single pool holding every training window.
    let mut class_pools: Vec<Vec<usize>> = if config.balance_classes {
        let mut pools = vec![Vec::new(); model.num_classes()];
        for (i, &y) in train_labels.iter().enumerate() {
            pools[y].push(i);
        }
        pools.retain(|pool| !pool.is_empty());
        pools
    } else {
        vec![(0..splits.train.len()).collect()]
    };
    let per_pool = class_pools.iter().map(Vec::len).min().unwrap_or(0);
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut order = Vec::with_capacity(per_pool * class_pools.len());
        for pool in &mut class_pools {
            pool.shuffle(&mut rng);
            order.extend_from_slice(&pool[..per_pool.min(pool.len())]);
        }
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = train_inputs.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train_labels[i]).collect();
            let (loss, grads) = loss_and_gradients(&model, &batch, &labels, config.l2)?;
            apply_gradients(&mut model, &grads, config.learning_rate);
            loss_sum += loss * chunk.len() as f64;
        }
        log.push(TrainLogEntry {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            holdout_accuracy: batch_accuracy(&model, &holdout_inputs, &holdout_labels)?,
        });
    }
    model.validate()?;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::normalize;
    use rand::Rng;

    /// Builds a small separable dataset: class Anomaly(1) windows ramp up,
    /// class Anomaly(2) windows ramp down, plus seeded jitter.
    fn separable_windows(records_per_class: usize, windows_per_record: usize) -> Vec<PulseWindow> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut windows = Vec::new();
        for class in [1u8, 2] {
            for r in 0..records_per_class {
                for w in 0..windows_per_record {
                    let base: Vec<f64> = (0..8)
                        .map(|i| {
                            let ramp = if class == 1 { i as f64 } else { 7.0 - i as f64 };
                            ramp + rng.random_range(-0.05..0.05)
                        })
                        .collect();
                    windows.push(normalize(PulseWindow {
                        cat: base.clone(),
                        cal: base,
                        source_id: format!("c{class}r{r}"),
                        start_index: w * 8,
                        label: Label::Anomaly(class),
                        stage_fraction: Some(0.5),
                    }));
                }
            }
        }
        windows
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.5,
            batch_size: 16,
            epochs: 20,
            seed: 3,
            l2: 0.0,
            hidden: vec![8],
            ..Default::default()
        }
    }

    #[test]
    fn uniform_model_loss_is_log_num_classes() {
        let classes = vec![Label::Nominal, Label::Anomaly(1), Label::Anomaly(2)];
        let mut model = ClassifierModel::init(4, &[], classes, 1).unwrap();
        model.weights[0].fill(0.0);
        let batch = Array2::from_shape_vec((2, 4), vec![0.3, -1.0, 2.0, 0.5, 1.0, 1.0, 0.0, -0.5])
            .unwrap();
        let (loss, _) = loss_and_gradients(&model, &batch, &[0, 2], 0.0).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
        // The l2 penalty adds exactly l2/2 * ||W||^2.
        let (loss_l2, _) = loss_and_gradients(&model, &batch, &[0, 2], 0.7).unwrap();
        assert!((loss_l2 - 3.0f64.ln()).abs() < 1e-12, "zero weights contribute no penalty");
    }

    #[test]
    fn confident_correct_prediction_drives_loss_to_zero() {
        let classes = vec![Label::Nominal, Label::Anomaly(1)];
        let mut model = ClassifierModel::init(2, &[], classes, 1).unwrap();
        model.weights[0].fill(0.0);
        model.biases[0] = ndarray::array![100.0, 0.0];
        let batch = Array2::from_shape_vec((1, 2), vec![0.1, 0.2]).unwrap();
        let (loss, _) = loss_and_gradients(&model, &batch, &[0], 0.0).unwrap();
        assert!((0.0..1e-6).contains(&loss), "loss {loss}");
    }

    #[test]
    fn out_of_range_label_rejected() {
        let classes = vec![Label::Nominal, Label::Anomaly(1)];
        let model = ClassifierModel::init(2, &[], classes, 1).unwrap();
        let batch = Array2::zeros((1, 2));
        assert!(matches!(
            loss_and_gradients(&model, &batch, &[2], 0.0),
            Err(Error::Domain(_))
        ));
    }

    /// Central-finite-difference check of every parameter's gradient.
    /// Seeds whose hidden pre-activations come within 1e-3 of a ReLU kink
    /// are skipped: the loss is not differentiable there and the numeric
    /// quotient is meaningless.
    #[test]
    fn gradients_match_finite_differences() {
        let classes = vec![Label::Nominal, Label::Anomaly(1), Label::Anomaly(2)];
        let h = 1e-5;
        let mut checked = 0;
        let mut seed = 0u64;
        while checked < 5 {
            seed += 1;
            let model = ClassifierModel::init(6, &[5, 4], classes.clone(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let batch = Array2::from_shape_fn((4, 6), |_| rng.random_range(-1.0..1.0));
            let labels = [0usize, 2, 1, 0];

            let mut near_kink = false;
            let mut activations = batch.clone();
            for k in 0..model.arch.len() - 1 {
                let pre = activations.dot(&model.weights[k]) + &model.biases[k];
                near_kink |= pre.iter().any(|&z| z.abs() < 1e-3);
                activations = pre.mapv(|z| z.max(0.0));
            }
            if near_kink {
                continue;
            }
            checked += 1;

            let l2 = 0.1;
            let (_, grads) = loss_and_gradients(&model, &batch, &labels, l2).unwrap();
            let mut max_rel = 0.0f64;
            for layer in 0..model.arch.len() {
                let n_w = model.weights[layer].len();
                for p in 0..n_w + model.biases[layer].len() {
                    let probe = |delta: f64| {
                        let mut m = model.clone();
                        if p < n_w {
                            m.weights[layer].as_slice_mut().unwrap()[p] += delta;
                        } else {
                            m.biases[layer][p - n_w] += delta;
                        }
                        loss_and_gradients(&m, &batch, &labels, l2).unwrap().0
                    };
                    let numeric = (probe(h) - probe(-h)) / (2.0 * h);
                    let analytic = if p < n_w {
                        grads.weights[layer].as_slice().unwrap()[p]
                    } else {
                        grads.biases[layer][p - n_w]
                    };
                    let rel = (analytic - numeric).abs()
                        / (analytic.abs() + numeric.abs()).max(1e-8);
                    max_rel = max_rel.max(rel);
                }
            }
            assert!(max_rel < 1e-6, "seed {seed}: max relative gradient error {max_rel:.3e}");
        }
    }

    #[test]
    fn split_respects_fractions_and_record_boundaries() {
        let windows = separable_windows(20, 3);
        let config = toy_config();
        let splits = split_windows(&windows, &config).unwrap();
        assert_eq!(splits.train.len(), 72); // 12 records per class * 3 windows
        assert_eq!(splits.calibration.len() + splits.test.len(), 48);
        assert!((splits.calibration.len() as i64 - 24).abs() <= 1);

        // No source id appears on both sides of the record-level split.
        let train_sources: std::collections::BTreeSet<_> =
            splits.train.iter().map(|w| w.source_id.clone()).collect();
        for w in splits.calibration.iter().chain(&splits.test) {
            assert!(!train_sources.contains(&w.source_id));
        }

        // Stratification keeps both classes in the training set.
        for class in [Label::Anomaly(1), Label::Anomaly(2)] {
            assert!(splits.train.iter().any(|w| w.label == class));
        }

        // Deterministic.
        let again = split_windows(&windows, &config).unwrap();
        assert_eq!(splits.train, again.train);
        assert_eq!(splits.calibration, again.calibration);
        assert_eq!(splits.test, again.test);
    }

    #[test]
    fn separable_toy_reaches_perfect_holdout_accuracy() {
        let windows = separable_windows(20, 3);
        let (_, log) = train(&windows, &toy_config()).unwrap();
        let final_acc = log.last().unwrap().holdout_accuracy;
        assert_eq!(final_acc, 1.0, "holdout accuracy {final_acc} after {} epochs", log.len());
    }

    #[test]
    fn training_is_deterministic() {
        let windows = separable_windows(10, 2);
        let config = toy_config();
        let (model_a, log_a) = train(&windows, &config).unwrap();
        let (model_b, log_b) = train(&windows, &config).unwrap();
        assert_eq!(model_a, model_b, "same seed must reproduce parameters bit-for-bit");
        assert_eq!(log_a, log_b);
        let other = TrainConfig { seed: 4, ..config };
        let (model_c, _) = train(&windows, &other).unwrap();
        assert_ne!(model_a, model_c);
    }

    #[test]
    fn zero_learning_rate_keeps_initial_parameters() {
        let windows = separable_windows(10, 2);
        let config = TrainConfig { learning_rate: 0.0, epochs: 3, ..toy_config() };
        let (model, _) = train(&windows, &config).unwrap();
        let reference = ClassifierModel::init(
            16,
            &config.hidden,
            vec![Label::Anomaly(1), Label::Anomaly(2)],
            derive_seed(config.seed, "init"),
        )
        .unwrap();
        assert_eq!(model, reference);
    }

    #[test]
    fn full_batch_loss_non_increasing_on_separable_data() {
        let windows = separable_windows(10, 2);
        let config = TrainConfig {
            learning_rate: 0.05,
            batch_size: windows.len(),
            epochs: 10,
            l2: 0.0,
            ..toy_config()
        };
        let (_, log) = train(&windows, &config).unwrap();
        for pair in log.windows(2) {
            assert!(
                pair[1].train_loss <= pair[0].train_loss + 1e-6,
                "loss rose from {} to {} at epoch {}",
                pair[0].train_loss,
                pair[1].train_loss,
                pair[1].epoch
            );
        }
    }

    #[test]
    fn single_class_dataset_rejected() {
        let windows: Vec<PulseWindow> = separable_windows(6, 2)
            .into_iter()
            .filter(|w| w.label == Label::Anomaly(1))
            .collect();
        assert!(train(&windows, &toy_config()).is_err());
    }

    #[test]
    fn prediction_invariant_to_input_scale_and_offset() {
        let windows = separable_windows(10, 2);
        let (model, _) = train(&windows, &toy_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
            let make = |xs: &[f64]| {
                normalize(PulseWindow {
                    cat: xs.to_vec(),
                    cal: xs.to_vec(),
                    source_id: "p".into(),
                    start_index: 0,
                    label: Label::Nominal,
                    stage_fraction: None,
                })
            };
            let (a, b) = (rng.random_range(0.5..3.0), rng.random_range(-5.0..5.0));
            let scaled: Vec<f64> = raw.iter().map(|x| a * x + b).collect();
            assert_eq!(
                model.predict(&make(&raw)).unwrap(),
                model.predict(&make(&scaled)).unwrap()
            );
        }
    }
}
