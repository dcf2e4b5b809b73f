//! End-to-end assessment: classification quality, coverage diagnostics,
//! and the earliness-of-detection benchmark.

pub mod earliness;
pub mod report;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, predict_proba_batch, ClassifierModel};
use crate::error::{Error, Result};
use crate::preprocess::PulseWindow;
use crate::signalgen::Label;

/// Detection parameters shared by the earliness benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Sigma multiplier of the amplitude-threshold baseline.
    pub k: f64,
    /// Persistence: consecutive agreeing windows required for a detection.
    pub m: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 3.0, m: 3 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::config(format!("k must be non-negative and finite, got {}", self.k)));
        }
        if self.m == 0 {
            return Err(Error::config("m must be at least 1"));
        }
        Ok(())
    }
}

/// Prediction counts per (true class, predicted class) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    /// Class order shared by rows (true) and columns (predicted).
    pub classes: Vec<Label>,
    /// `counts[[i, j]]` = examples of true class `i` predicted as `j`.
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    /// Tallies (true, predicted) label pairs against a fixed class order.
    pub fn from_pairs(
        classes: Vec<Label>,
        pairs: impl IntoIterator<Item = (Label, Label)>,
    ) -> Result<Self> {
        let index = |label: Label| {
            classes
                .iter()
                .position(|&c| c == label)
                .ok_or_else(|| Error::domain(format!("label {label} is not an evaluated class")))
        };
        let mut counts = Array2::zeros((classes.len(), classes.len()));
        for (truth, predicted) in pairs {
            counts[[index(truth)?, index(predicted)?]] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[[i, i]]).sum()
    }

    /// `trace / total` over every class.
    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Accuracy restricted to rows whose true class is an anomaly
    /// (Nominal-labeled examples excluded from the denominator).
    pub fn anomaly_accuracy(&self) -> Result<f64> {
        let (mut hits, mut total) = (0u64, 0u64);
        for (i, &class) in self.classes.iter().enumerate() {
            if class == Label::Nominal {
                continue;
            }
            hits += self.counts[[i, i]];
            total += self.counts.row(i).sum();
        }
        if total == 0 {
            return Err(Error::domain("no anomaly-class examples in the confusion matrix"));
        }
        Ok(hits as f64 / total as f64)
    }

    /// Rows divided by their sums; a row with no examples is undefined
    /// (`None`), not zero.
    pub fn normalized(&self) -> Vec<Option<Vec<f64>>> {
        self.counts
            .rows()
            .into_iter()
            .map(|row| {
                let sum = row.sum();
                (sum > 0)
                    .then(|| row.iter().map(|&v| v as f64 / sum as f64).collect())
            })
            .collect()
    }

    /// Per-class recall: the diagonal of the normalized matrix.
    pub fn normalized_diagonal(&self) -> Vec<Option<f64>> {
        self.normalized()
            .iter()
            .enumerate()
            .map(|(i, row)| row.as_ref().map(|r| r[i]))
            .collect()
    }
}

/// Runs the model over a test set and tallies the confusion matrix;
/// returns it with the overall accuracy.
pub fn evaluate_classifier(
    model: &ClassifierModel,
    test: &[PulseWindow],
) -> Result<(ConfusionMatrix, f64)> {
    if test.is_empty() {
        return Err(Error::domain("evaluation requires a non-empty test set"));
    }
    let probs = predict_proba_batch(model, test)?;
    let pairs: Vec<(Label, Label)> = test
        .iter()
        .zip(probs.rows())
        .map(|(w, row)| {
            model.class_index(w.label)?;
            Ok((w.label, model.classes[argmax(row.as_slice().expect("contiguous row"))]))
        })
        .collect::<Result<_>>()?;
    let matrix = ConfusionMatrix::from_pairs(model.classes.clone(), pairs)?;
    let accuracy = matrix.accuracy();
    Ok((matrix, accuracy))
}
