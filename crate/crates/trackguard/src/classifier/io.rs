//! Model and training-log persistence.
//!
//! Model file: a JSON document with fields
//!
//! * `format` — version tag, currently `"trackguard-model v1"`;
//! * `rng_seed` — seed the parameters were initialized from;
//! * `classes` — output class labels in logit order;
//! * `layers` — ordered dense layers, each with `input_dim`,
//!   `output_dim`, `activation` (`"ReLU"` or `"Identity"`), row-major
//!   `weights` (`input_dim * output_dim` values) and `biases`
//!   (`output_dim` values).
//!
//! Floats are serialized with shortest round-trip formatting, so
//! `load_model(save_model(m)) == m` bit-for-bit.
//!
//! Training log: CSV with header `epoch,train_loss,holdout_accuracy`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::train::TrainLogEntry;
use super::{Activation, ClassifierModel, LayerSpec, MODEL_FORMAT};
use crate::error::{Error, Result};
use crate::signalgen::Label;

#[derive(Serialize, Deserialize)]
struct LayerFile {
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    rng_seed: u64,
    classes: Vec<Label>,
    layers: Vec<LayerFile>,
}

/// Writes a model to `path` as versioned JSON.
pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    model.validate()?;
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        rng_seed: model.rng_seed,
        classes: model.classes.clone(),
        layers: model
            .arch
            .iter()
            .zip(model.weights.iter().zip(&model.biases))
            .map(|(spec, (w, b))| LayerFile {
                input_dim: spec.input_dim,
                output_dim: spec.output_dim,
                activation: spec.activation,
                weights: w.iter().copied().collect(),
                biases: b.to_vec(),
            })
            .collect(),
    };
    let mut body = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
    body.push('\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Loads a model from `path`, checking the version tag and every layer
/// shape.
pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    let fail = |message: String| Error::Format { path: path.to_path_buf(), message };
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&body).map_err(|e| fail(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(fail(format!(
            "unsupported model format {:?} (expected {MODEL_FORMAT:?})",
            file.format
        )));
    }
    let mut arch = Vec::new();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (k, layer) in file.layers.into_iter().enumerate() {
        if layer.weights.len() != layer.input_dim * layer.output_dim {
            return Err(fail(format!(
                "layer {k} weights: expected {} values, found {}",
                layer.input_dim * layer.output_dim,
                layer.weights.len()
            )));
        }
        if layer.biases.len() != layer.output_dim {
            return Err(fail(format!(
                "layer {k} biases: expected {} values, found {}",
                layer.output_dim,
                layer.biases.len()
            )));
        }
        arch.push(LayerSpec {
            input_dim: layer.input_dim,
            output_dim: layer.output_dim,
            activation: layer.activation,
        });
        weights.push(
            Array2::from_shape_vec((layer.input_dim, layer.output_dim), layer.weights)
                .expect("length checked above"),
        );
        biases.push(Array1::from_vec(layer.biases));
    }
    let model = ClassifierModel {
        arch,
        weights,
        biases,
        classes: file.classes,
        rng_seed: file.rng_seed,
    };
    model.validate().map_err(|e| fail(e.to_string()))?;
    Ok(model)
}

/// Writes the per-epoch training log as CSV.
pub fn write_training_log(log: &[TrainLogEntry], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,train_loss,holdout_accuracy\n");
    for entry in log {
        out.push_str(&format!(
            "{},{},{}\n",
            entry.epoch, entry.train_loss, entry.holdout_accuracy
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a training-log CSV written by [`write_training_log`].
pub fn read_training_log(path: &Path) -> Result<Vec<TrainLogEntry>> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::CsvParse { path: path.into(), line, message };
    let mut lines = body.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".to_string()))?;
    if header != "epoch,train_loss,holdout_accuracy" {
        return Err(err(1, format!("unexpected training log header {header:?}")));
    }
    let mut log = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        let [epoch, loss, acc] = fields[..] else {
            return Err(err(line_no, format!("expected 3 fields, got {}", fields.len())));
        };
        log.push(TrainLogEntry {
            epoch: epoch
                .parse()
                .map_err(|_| err(line_no, format!("invalid epoch {epoch:?}")))?,
            train_loss: loss
                .parse()
                .map_err(|_| err(line_no, format!("invalid train_loss {loss:?}")))?,
            holdout_accuracy: acc
                .parse()
                .map_err(|_| err(line_no, format!("invalid holdout_accuracy {acc:?}")))?,
        });
    }
    Ok(log)
}
