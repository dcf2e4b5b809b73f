//! Split conformal prediction over classifier probabilities.
//!
//! Given a calibration set of `n` held-out examples, each example's
//! conformity score is `s_i = 1 − p_i(true class)`. The calibration
//! threshold is the `k`-th smallest score with
//!
//! ```text
//! k = ceil((n + 1) * (1 - alpha))
//! ```
//!
//! — the finite-sample-valid order statistic. If `k > n` (calibration set
//! too small for the requested `alpha`), the threshold saturates to 1 and
//! the result is flagged. A test input's prediction set is every class
//! whose probability reaches `1 − q_hat`:
//!
//! ```text
//! set(x) = { y : p(y | x) >= 1 - q_hat }
//! ```
//!
//! For exchangeable calibration and test data this guarantees marginal
//! coverage `P(true class in set) >= 1 - alpha`. The set may be *empty*:
//! no trained class reaches the calibrated confidence bar, which is the
//! signal that the input resembles no class seen in calibration — an
//! unknown anomaly.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_METHOD: &str = "one_minus_true_prob";
pub const CALIBRATION_FORMAT: &str = "trackguard-calibration v1";

/// Output of [`calibrate`]: the score threshold and its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Format tag, `"trackguard-calibration v1"`.
    pub format: String,
    /// Score threshold in `[0, 1]`.
    pub q_hat: f64,
    /// Acceptable error level the threshold was calibrated for.
    pub alpha: f64,
    /// Calibration-set size.
    pub n_cal: usize,
    /// Conformity score identifier.
    pub score_method: String,
    /// True when `n_cal` was too small for `alpha` and `q_hat` saturated
    /// to 1 (every prediction set then contains all classes).
    pub saturated: bool,
}

impl CalibrationResult {
    /// Builds a result carrying the standard format and score-method tags.
    pub fn new(alpha: f64, n_cal: usize, q_hat: f64, saturated: bool) -> Self {
        CalibrationResult {
            format: CALIBRATION_FORMAT.to_string(),
            q_hat,
            alpha,
            n_cal,
            score_method: SCORE_METHOD.to_string(),
            saturated,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })?;
        body.push('\n');
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let calib: CalibrationResult = serde_json::from_str(&body).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if calib.format != CALIBRATION_FORMAT {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!(
                    "unsupported calibration format {:?} (expected {CALIBRATION_FORMAT:?})",
                    calib.format
                ),
            });
        }
        Ok(calib)
    }
}

/// The classes whose probability passed the calibrated threshold for one
/// input. May be empty — the unknown-anomaly signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    /// Included class indices, ascending. Empty signals an input unlike
    /// any calibrated class.
    pub labels: Vec<usize>,
    /// The full probability vector the set was derived from.
    pub probs: Vec<f64>,
    /// Threshold used to build the set.
    pub q_hat_used: f64,
}

impl PredictionSet {
    pub fn contains(&self, class_index: usize) -> bool {
        self.labels.binary_search(&class_index).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }
}

fn validate_prob_row(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::domain("probability vector must be non-empty"));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::domain("probabilities must be finite and non-negative"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("probability vector sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Conformity score of every example: `1 − p(true class)`, clamped into
/// `[0, 1]`. Rows of `probs` are per-example probability vectors.
pub fn conformity_scores(probs: &Array2<f64>, labels: &[usize]) -> Result<Vec<f64>> {
    if probs.nrows() != labels.len() {
        return Err(Error::domain(format!(
            "{} probability rows but {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    let num_classes = probs.ncols();
    let mut scores = Vec::with_capacity(labels.len());
    for (row, &y) in probs.rows().into_iter().zip(labels) {
        validate_prob_row(row.as_slice().expect("contiguous row"))?;
        if y >= num_classes {
            return Err(Error::domain(format!(
                "label index {y} out of range for {num_classes} classes"
            )));
        }
        scores.push((1.0 - row[y]).clamp(0.0, 1.0));
    }
    Ok(scores)
}

/// Computes the split-conformal threshold: the `k`-th smallest calibration
/// score with `k = ceil((n+1)(1−alpha))`, saturating to 1 when `k > n`.
pub fn calibrate(scores: &[f64], alpha: f64) -> Result<CalibrationResult> {
    if scores.is_empty() {
        return Err(Error::domain("calibration requires at least one score"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::domain("conformity scores must lie in [0, 1]"));
    }
    let n = scores.len();
    let k = ((n + 1) as f64 * (1.0 - alpha)).ceil() as usize;
    let (q_hat, saturated) = if k > n {
        (1.0, true)
    } else {
        let mut sorted = scores.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        (sorted[k - 1], false)
    };
    Ok(CalibrationResult::new(alpha, n, q_hat, saturated))
}

/// Builds the prediction set `{ y : probs[y] >= 1 - q_hat }` for one
/// probability vector.
pub fn predict_set(probs: &[f64], calib: &CalibrationResult) -> Result<PredictionSet> {
    validate_prob_row(probs)?;
    let threshold = 1.0 - calib.q_hat;
    let labels = (0..probs.len()).filter(|&y| probs[y] >= threshold).collect();
    Ok(PredictionSet { labels, probs: probs.to_vec(), q_hat_used: calib.q_hat })
}

fn check_lengths(sets: &[PredictionSet], true_labels: &[usize]) -> Result<()> {
    if sets.len() != true_labels.len() {
        return Err(Error::domain(format!(
            "{} prediction sets but {} labels",
            sets.len(),
            true_labels.len()
        )));
    }
    Ok(())
}

/// Fraction of examples whose prediction set contains the true class.
pub fn marginal_coverage(sets: &[PredictionSet], true_labels: &[usize]) -> Result<f64> {
    check_lengths(sets, true_labels)?;
    if sets.is_empty() {
        return Err(Error::domain("coverage requires at least one example"));
    }
    let hits = sets.iter().zip(true_labels).filter(|(s, &y)| s.contains(y)).count();
    Ok(hits as f64 / sets.len() as f64)
}

/// Empirical coverage of one class under the shared marginal threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCoverage {
    pub class_index: usize,
    /// Number of test examples of this class.
    pub n: usize,
    /// Fraction covered; `None` when the class is absent from the data
    /// (undefined, not zero).
    pub coverage: Option<f64>,
}

/// Per-class empirical coverage of the marginal procedure.
pub fn class_conditional_coverage(
    sets: &[PredictionSet],
    true_labels: &[usize],
    num_classes: usize,
) -> Result<Vec<ClassCoverage>> {
    check_lengths(sets, true_labels)?;
    if let Some(&bad) = true_labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::domain(format!(
            "label index {bad} out of range for {num_classes} classes"
        )));
    }
    let mut n = vec![0usize; num_classes];
    let mut hits = vec![0usize; num_classes];
    for (set, &y) in sets.iter().zip(true_labels) {
        n[y] += 1;
        if set.contains(y) {
            hits[y] += 1;
        }
    }
    Ok((0..num_classes)
        .map(|c| ClassCoverage {
            class_index: c,
            n: n[c],
            coverage: (n[c] > 0).then(|| hits[c] as f64 / n[c] as f64),
        })
        .collect())
}

/// Mean prediction-set cardinality.
pub fn average_set_size(sets: &[PredictionSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::domain("average set size requires at least one set"));
    }
    Ok(sets.iter().map(|s| s.len() as f64).sum::<f64>() / sets.len() as f64)
}

/// Fraction of empty (unknown-anomaly) sets.
pub fn empty_set_rate(sets: &[PredictionSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::domain("empty-set rate requires at least one set"));
    }
    Ok(sets.iter().filter(|s| s.is_empty()).count() as f64 / sets.len() as f64)
}

/// Writes the coverage diagnostics CSV: `class,coverage,n` rows per class
/// (empty coverage field when a class is absent), then `marginal` and
/// `average_set_size` summary rows.
pub fn write_coverage_csv(
    rows: &[(String, Option<f64>, usize)],
    marginal: f64,
    avg_set_size: f64,
    total_n: usize,
    path: &Path,
) -> Result<()> {
    let mut out = String::from("class,coverage,n\n");
    for (name, coverage, n) in rows {
        match coverage {
            Some(c) => writeln!(out, "{name},{c},{n}"),
            None => writeln!(out, "{name},,{n}"),
        }
        .expect("writing to a String cannot fail");
    }
    writeln!(out, "marginal,{marginal},{total_n}").expect("writing to a String cannot fail");
    writeln!(out, "average_set_size,{avg_set_size},{total_n}")
        .expect("writing to a String cannot fail");
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
