//! Performance criteria with explicit orientation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Press,
    Q2,
    Mae,
    Mse,
    Nmc,
    Wmc,
    Precision,
    Recall,
    F1,
    Auroc,
    Mcc,
    Kappa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl MetricName {
    pub fn orientation(self) -> Orientation {
        use MetricName::*;
        match self {
            Q2 | Precision | Recall | F1 | Auroc | Mcc | Kappa => Orientation::HigherBetter,
            Press | Mae | Mse | Nmc | Wmc => Orientation::LowerBetter,
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(self, MetricName::Press | MetricName::Q2 | MetricName::Mae | MetricName::Mse)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub name: MetricName,
    /// False-positive weight (wmc only).
    #[serde(default = "default_w_fp")]
    pub w_fp: f64,
    /// False-negative weight (wmc only).
    #[serde(default = "default_w_fn")]
    pub w_fn: f64,
    /// Positive label for binary criteria; defaults to the largest label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<f64>,
}

fn default_w_fp() -> f64 {
    1.0
}

fn default_w_fn() -> f64 {
    100.0
}

impl MetricSpec {
    pub fn new(name: MetricName) -> Self {
        Self {
            name,
            w_fp: default_w_fp(),
            w_fn: default_w_fn(),
            positive_class: None,
        }
    }

    pub fn orientation(&self) -> Orientation {
        self.name.orientation()
    }

    /// True when `a` is strictly better than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.orientation() {
            Orientation::HigherBetter => a > b,
            Orientation::LowerBetter => a < b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_fp >= 0.0 && self.w_fn >= 0.0) {
            return Err(Error::invalid("wmc weights must be non-negative"));
        }
        Ok(())
    }
}

/// Regression criteria on matching blocks. `baseline` holds the
/// cross-validated mean predictor's values row by row (required for q2).
pub fn regression_metric(
    spec: &MetricSpec,
    y_true: &Matrix,
    y_pred: &Matrix,
    baseline: Option<&Matrix>,
) -> Result<f64> {
    if y_true.shape() != y_pred.shape() {
        return Err(Error::shape(format!(
            "truth {:?} vs prediction {:?}",
            y_true.shape(),
            y_pred.shape()
        )));
    }
    let count = y_true.values().len() as f64;
    let sq = |p: &Matrix| -> f64 {
        y_true
            .values()
            .iter()
            .zip(p.values())
            .map(|(t, p)| (t - p) * (t - p))
            .sum()
    };
    match spec.name {
        MetricName::Press => Ok(sq(y_pred)),
        MetricName::Mse => Ok(sq(y_pred) / count),
        MetricName::Mae => Ok(y_true
            .values()
            .iter()
            .zip(y_pred.values())
            .map(|(t, p)| (t - p).abs())
            .sum::<f64>()
            / count),
        MetricName::Q2 => {
            let base = baseline.ok_or_else(|| Error::invalid("q2 needs the mean-predictor baseline"))?;
            if base.shape() != y_true.shape() {
                return Err(Error::shape("baseline shape differs from truth"));
            }
            let press0 = sq(base);
            if !(press0 > 0.0) {
                return Err(Error::degenerate("q2 baseline PRESS is zero (constant response)"));
            }
            Ok(1.0 - sq(y_pred) / press0)
        }
        other => Err(Error::invalid(format!("{other:?} is not a regression criterion"))),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Binary confusion counts. At most two distinct labels may occur across
/// truth and prediction.
pub fn classification_counts(
    labels_true: &[f64],
    labels_pred: &[f64],
    positive_class: f64,
) -> Result<ConfusionCounts> {
    if labels_true.len() != labels_pred.len() {
        return Err(Error::shape(format!(
            "{} true labels vs {} predictions",
            labels_true.len(),
            labels_pred.len()
        )));
    }
    let mut seen: Vec<f64> = vec![positive_class];
    for &l in labels_true.iter().chain(labels_pred) {
        if !seen.contains(&l) {
            seen.push(l);
        }
    }
    if seen.len() > 2 {
        return Err(Error::invalid(format!(
            "labels {seen:?} are not binary around positive class {positive_class}"
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        match (t == positive_class, p == positive_class) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn nmc(c: &ConfusionCounts) -> usize {
    c.fp + c.fn_
}

pub fn wmc(c: &ConfusionCounts, w_fp: f64, w_fn: f64) -> f64 {
    w_fp * c.fp as f64 + w_fn * c.fn_ as f64
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(c: &ConfusionCounts) -> f64 {
    ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

pub fn kappa(c: &ConfusionCounts) -> f64 {
    let n = c.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let observed = (tp + tn) / n;
    let expected = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
    if expected >= 1.0 {
        0.0
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

/// Whether `name` fell back to its 0/0 convention for these counts.
pub fn is_degenerate(name: MetricName, c: &ConfusionCounts) -> bool {
    let n = c.total() as f64;
    match name {
        MetricName::Precision => c.tp + c.fp == 0,
        MetricName::Recall => c.tp + c.fn_ == 0,
        MetricName::F1 => 2 * c.tp + c.fp + c.fn_ == 0,
        MetricName::Mcc => c.tp + c.fp == 0 || c.tp + c.fn_ == 0 || c.tn + c.fp == 0 || c.tn + c.fn_ == 0,
        MetricName::Kappa => {
            let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
            n == 0.0 || ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n) >= 1.0
        }
        _ => false,
    }
}

/// Value of a count-based criterion.
pub fn count_metric(spec: &MetricSpec, c: &ConfusionCounts) -> Result<f64> {
    Ok(match spec.name {
        MetricName::Nmc => nmc(c) as f64,
        MetricName::Wmc => wmc(c, spec.w_fp, spec.w_fn),
        MetricName::Precision => precision(c),
        MetricName::Recall => recall(c),
        MetricName::F1 => f1(c),
        MetricName::Mcc => mcc(c),
        MetricName::Kappa => kappa(c),
        other => return Err(Error::invalid(format!("{other:?} is not a count criterion"))),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auroc: f64,
}

/// ROC by a threshold sweep over distinct scores, highest first. Tied
/// scores move both rates at once (a diagonal segment), and the area is the
/// trapezoidal integral.
pub fn roc_curve(scores: &[f64], labels_true: &[f64], positive_class: f64) -> Result<RocCurve> {
    if scores.len() != labels_true.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels_true.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let positives = labels_true.iter().filter(|&&l| l == positive_class).count();
    let negatives = labels_true.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::degenerate("ROC needs both positive and negative rows"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (pf, nf) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auroc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels_true[order[i]] == positive_class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap_or(&(0.0, 0.0));
        let (x1, y1) = (fp as f64 / nf, tp as f64 / pf);
        auroc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auroc })
}
