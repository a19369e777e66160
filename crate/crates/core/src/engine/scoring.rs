//! Out-of-fold predictions pooled across folds and scored as one block.

use super::PipelineSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{
    classification_counts, count_metric, is_degenerate, regression_metric, roc_curve, MetricName,
};

#[derive(Clone, Debug, Default)]
pub(crate) struct Pooled {
    /// Original row index of every pooled prediction.
    pub rows: Vec<usize>,
    /// Response row (regression) or `[label]` (discriminant).
    pub truth: Vec<Vec<f64>>,
    /// Predicted response row or `[predicted label]`.
    pub pred: Vec<Vec<f64>>,
    /// Build-portion mean of the fold that produced each row.
    pub baseline: Vec<Vec<f64>>,
    /// Predicted dummy score of the positive class (discriminant only).
    pub pos_score: Vec<f64>,
}

/// A scored block; `degenerate` marks a 0/0 convention in the criterion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Scored {
    pub value: f64,
    pub degenerate: bool,
}

impl Pooled {
    pub fn extend(&mut self, other: Pooled) {
        self.rows.extend(other.rows);
        self.truth.extend(other.truth);
        self.pred.extend(other.pred);
        self.baseline.extend(other.baseline);
        self.pos_score.extend(other.pos_score);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::from_rows(rows)
}

/// Scores a pooled block under the pipeline's metric.
pub(crate) fn score(spec: &PipelineSpec, pooled: &Pooled, positive: Option<f64>) -> Result<Scored> {
    if pooled.len() == 0 {
        return Err(Error::degenerate("no held-out predictions to score"));
    }
    let m = &spec.metric;
    if m.name.is_regression() {
        let truth = to_matrix(&pooled.truth)?;
        let pred = to_matrix(&pooled.pred)?;
        let base = to_matrix(&pooled.baseline)?;
        let value = regression_metric(m, &truth, &pred, Some(&base))?;
        return Ok(Scored {
            value,
            degenerate: false,
        });
    }
    let truth: Vec<f64> = pooled.truth.iter().map(|r| r[0]).collect();
    let pred: Vec<f64> = pooled.pred.iter().map(|r| r[0]).collect();
    if m.name == MetricName::Nmc {
        let wrong = truth.iter().zip(&pred).filter(|(t, p)| t != p).count();
        return Ok(Scored {
            value: wrong as f64,
            degenerate: false,
        });
    }
    let pos = positive.ok_or_else(|| Error::invalid("positive class unresolved"))?;
    if m.name == MetricName::Auroc {
        let value = roc_curve(&pooled.pos_score, &truth, pos)?.auroc;
        return Ok(Scored {
            value,
            degenerate: false,
        });
    }
    // Other count criteria reduce to "positive class versus the rest".
    let bin = |v: &[f64]| -> Vec<f64> { v.iter().map(|&l| f64::from(u8::from(l == pos))).collect() };
    let counts = classification_counts(&bin(&truth), &bin(&pred), 1.0)?;
    Ok(Scored {
        value: count_metric(m, &counts)?,
        degenerate: is_degenerate(m.name, &counts),
    })
}
