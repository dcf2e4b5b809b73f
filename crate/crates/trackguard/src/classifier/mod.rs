//! From-scratch feedforward classifier over pulse windows.
//!
//! The model is a chain of dense layers (`x·W + b` on row vectors) with
//! ReLU activations between them and an identity final layer producing
//! logits, one per class. Everything is 64-bit and deterministic: weights
//! are initialized from a seeded uniform He-style distribution
//! (`±sqrt(6 / fan_in)`), and inference is pure.
//!
//! A window enters the network as its CAT samples followed by its CAL
//! samples, so `input_dim = 2 * window_len`.

pub mod io;
pub mod train;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PulseWindow;
use crate::signalgen::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Identity,
}

/// Shape and activation of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

pub const MODEL_FORMAT: &str = "trackguard-model v1";

/// A trained (or freshly initialized) classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    /// Layer shapes; the last layer has `Identity` activation and one
    /// output per class.
    pub arch: Vec<LayerSpec>,
    /// Per-layer weight matrices, shape `[input_dim, output_dim]`.
    pub weights: Vec<Array2<f64>>,
    /// Per-layer bias vectors, length `output_dim`.
    pub biases: Vec<Array1<f64>>,
    /// Output classes in canonical order; logit `i` scores `classes[i]`.
    pub classes: Vec<Label>,
    /// Seed the parameters were initialized from.
    pub rng_seed: u64,
}

impl ClassifierModel {
    /// Builds a seeded He-initialized model with the given hidden layer
    /// widths between `input_dim` and one output per class.
    pub fn init(input_dim: usize, hidden: &[usize], classes: Vec<Label>, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("input_dim must be positive"));
        }
        if classes.len() < 2 {
            return Err(Error::config("a classifier needs at least 2 classes"));
        }
        if hidden.contains(&0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(classes.len());

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut arch = Vec::new();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[k], dims[k + 1]);
            let activation =
                if k + 2 == dims.len() { Activation::Identity } else { Activation::ReLU };
            arch.push(LayerSpec { input_dim: fan_in, output_dim: fan_out, activation });
            let bound = (6.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random_range(-bound..bound)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        let model = ClassifierModel { arch, weights, biases, classes, rng_seed: seed };
        model.validate()?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.arch.first().map_or(0, |l| l.input_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Index of `label` in the model's class list.
    pub fn class_index(&self, label: Label) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == label)
            .ok_or_else(|| Error::domain(format!("label {label} is not a model class")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.arch.is_empty() {
            return Err(Error::domain("model must have at least one layer"));
        }
        if self.arch.len() != self.weights.len() || self.arch.len() != self.biases.len() {
            return Err(Error::domain("arch/params layer count mismatch"));
        }
        for (k, layer) in self.arch.iter().enumerate() {
            if layer.input_dim == 0 || layer.output_dim == 0 {
                return Err(Error::domain(format!("layer {k} has a zero dimension")));
            }
            if k > 0 && self.arch[k - 1].output_dim != layer.input_dim {
                return Err(Error::domain(format!(
                    "layer {k} input_dim {} does not chain from previous output_dim {}",
                    layer.input_dim,
                    self.arch[k - 1].output_dim
                )));
            }
            if self.weights[k].dim() != (layer.input_dim, layer.output_dim) {
                return Err(Error::domain(format!("layer {k} weight shape mismatch")));
            }
            if self.biases[k].len() != layer.output_dim {
                return Err(Error::domain(format!("layer {k} bias length mismatch")));
            }
            if self.weights[k].iter().chain(self.biases[k].iter()).any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("layer {k} has non-finite parameters")));
            }
        }
        let last = self.arch.last().expect("non-empty arch");
        if last.activation != Activation::Identity {
            return Err(Error::domain("final layer must have Identity activation"));
        }
        if last.output_dim != self.classes.len() {
            return Err(Error::domain(format!(
                "final layer width {} does not match {} classes",
                last.output_dim,
                self.classes.len()
            )));
        }
        let mut sorted = self.classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.classes.len() {
            return Err(Error::domain("duplicate class labels in model"));
        }
        Ok(())
    }

    /// Computes logits for a batch of row-vector inputs.
    pub fn forward(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_trace(batch)?.pop().expect("at least one layer output"))
    }

    /// Runs the forward pass keeping every layer's post-activation output;
    /// the last element is the logits. Used by backpropagation.
    pub(crate) fn forward_trace(&self, batch: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::domain(format!(
                "input dimension {} does not match model input_dim {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        let mut outputs = Vec::with_capacity(self.arch.len());
        let mut current = batch.dot(&self.weights[0]) + &self.biases[0];
        apply_activation(&mut current, self.arch[0].activation);
        outputs.push(current);
        for k in 1..self.arch.len() {
            let mut next = outputs[k - 1].dot(&self.weights[k]) + &self.biases[k];
            apply_activation(&mut next, self.arch[k].activation);
            outputs.push(next);
        }
        Ok(outputs)
    }

    /// Class probabilities for one window.
    pub fn predict_proba(&self, window: &PulseWindow) -> Result<Vec<f64>> {
        let input = window_input(window);
        let batch = Array2::from_shape_vec((1, input.len()), input)
            .expect("shape matches by construction");
        let logits = self.forward(&batch)?;
        Ok(softmax(&logits.row(0).to_owned()).to_vec())
    }

    /// Most probable class; exact ties resolve to the lowest class index.
    pub fn predict(&self, window: &PulseWindow) -> Result<Label> {
        let probs = self.predict_proba(window)?;
        Ok(self.classes[argmax(&probs)])
    }
}

fn apply_activation(values: &mut Array2<f64>, activation: Activation) {
    if activation == Activation::ReLU {
        values.mapv_inplace(|v| v.max(0.0));
    }
}

/// Index of the largest value; exact ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max-subtraction); output sums to 1 within
/// 1e-12 and is invariant to adding a constant to all logits.
pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Row-wise [`softmax`] over a batch of logits.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Flattens a window into the model input layout: CAT samples then CAL
/// samples.
pub fn window_input(window: &PulseWindow) -> Vec<f64> {
    let mut input = Vec::with_capacity(window.cat.len() + window.cal.len());
    input.extend_from_slice(&window.cat);
    input.extend_from_slice(&window.cal);
    input
}

/// Stacks windows into a `[n, 2 * window_len]` input matrix.
pub fn windows_matrix(windows: &[PulseWindow]) -> Result<Array2<f64>> {
    let Some(first) = windows.first() else {
        return Err(Error::domain("cannot build an input matrix from zero windows"));
    };
    let dim = first.cat.len() + first.cal.len();
    let mut data = Vec::with_capacity(windows.len() * dim);
    for w in windows {
        if w.cat.len() + w.cal.len() != dim {
            return Err(Error::domain("windows have inconsistent lengths"));
        }
        data.extend_from_slice(&w.cat);
        data.extend_from_slice(&w.cal);
    }
    Array2::from_shape_vec((windows.len(), dim), data)
        .map_err(|e| Error::domain(format!("window matrix shape error: {e}")))
}

/// Per-row class probabilities for a batch of windows.
pub fn predict_proba_batch(model: &ClassifierModel, windows: &[PulseWindow]) -> Result<Array2<f64>> {
    let batch = windows_matrix(windows)?;
    Ok(softmax_rows(&model.forward(&batch)?))
}
