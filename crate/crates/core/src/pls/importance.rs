use serde::{Deserialize, Serialize};

use super::PlsModel;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};

/// Variable filter applied after a PLS fit on build data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectionSpec {
    None,
    /// Keep variables with VIP strictly above `threshold`.
    Vip {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Keep variables with selectivity ratio strictly above `threshold`.
    Sr {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Sparse PLS keeping `keep_k` nonzero weights per component.
    Sparse { keep_k: usize },
}

fn default_threshold() -> f64 {
    1.0
}

impl SelectionSpec {
    pub fn is_filter(&self) -> bool {
        matches!(self, SelectionSpec::Vip { .. } | SelectionSpec::Sr { .. })
    }
}

/// Variable importance in projection.
///
/// `VIP_j = sqrt(p · Σ_a SSY_a (w_ja/‖w_a‖)² / Σ_a SSY_a)` with
/// `SSY_a = ‖q_a‖² ‖t_a‖²`, so the squared scores average to one.
pub fn vip_scores(m: &PlsModel) -> Result<Vec<f64>> {
    if m.n_lv == 0 {
        return Err(Error::invalid("VIP needs at least one latent variable"));
    }
    let p = m.weights.rows();
    let ssy: Vec<f64> = (0..m.n_lv)
        .map(|a| {
            let q = m.y_loadings.column(a);
            let t = m.scores.column(a);
            dot(&q, &q) * dot(&t, &t)
        })
        .collect();
    let total: f64 = ssy.iter().sum();
    if !(total > 0.0) {
        return Err(Error::degenerate("model explains no Y variance"));
    }
    let wnorm: Vec<f64> = (0..m.n_lv).map(|a| norm(&m.weights.column(a))).collect();
    Ok((0..p)
        .map(|j| {
            let s: f64 = (0..m.n_lv)
                .map(|a| {
                    let w = m.weights.get(j, a) / wnorm[a];
                    ssy[a] * w * w
                })
                .sum();
            (p as f64 * s / total).sqrt()
        })
        .collect())
}

/// Selectivity ratios, averaged over the response columns with a nonzero
/// coefficient vector. `infinite` lists variables whose residual vanished
/// (score `+∞`).
#[derive(Clone, Debug, PartialEq)]
pub struct SrScores {
    pub values: Vec<f64>,
    pub infinite: Vec<usize>,
}

/// Residual sums of squares at or below this fraction of a column's total
/// are treated as zero.
const ZERO_RESIDUAL: f64 = 1e-20;

/// Target-projection selectivity ratio of every variable in `xc`, the
/// preprocessed build block the model was fitted on.
pub fn sr_scores(m: &PlsModel, xc: &Matrix) -> Result<SrScores> {
    let (n, p) = xc.shape();
    if p != m.n_vars() {
        return Err(Error::shape(format!(
            "model has {} variables, X has {p}",
            m.n_vars()
        )));
    }
    let mut sums = vec![0.0; p];
    let mut used = 0usize;
    for c in 0..m.n_responses() {
        let b = m.coefficients.column(c);
        let bn = norm(&b);
        if !(bn > 0.0) {
            continue;
        }
        let t: Vec<f64> = xc.mul_vec(&b).into_iter().map(|v| v / bn).collect();
        let tt = dot(&t, &t);
        if !(tt > 0.0) {
            continue;
        }
        used += 1;
        let p_tp: Vec<f64> = xc.tr_mul_vec(&t).into_iter().map(|v| v / tt).collect();
        for j in 0..p {
            let explained = tt * p_tp[j] * p_tp[j];
            let mut residual = 0.0;
            let mut total = 0.0;
            for i in 0..n {
                let x = xc.get(i, j);
                let r = x - t[i] * p_tp[j];
                residual += r * r;
                total += x * x;
            }
            sums[j] += if residual <= ZERO_RESIDUAL * total {
                if total > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                explained / residual
            };
        }
    }
    if used == 0 {
        return Err(Error::degenerate("zero regression coefficient vector"));
    }
    let values: Vec<f64> = sums.into_iter().map(|s| s / used as f64).collect();
    let infinite = (0..p).filter(|&j| values[j].is_infinite()).collect();
    Ok(SrScores { values, infinite })
}

/// Indices kept by `spec` for a model fitted on the build block `xc`.
///
/// An empty result is reported as [`Error::EmptySelection`]; the caller
/// decides on the fallback.
pub fn apply_selection(spec: &SelectionSpec, xc: &Matrix, m: &PlsModel) -> Result<Vec<usize>> {
    let keep: Vec<usize> = match spec {
        SelectionSpec::None => (0..xc.cols()).collect(),
        SelectionSpec::Vip { threshold } => {
            let v = vip_scores(m)?;
            (0..v.len()).filter(|&j| v[j] > *threshold).collect()
        }
        SelectionSpec::Sr { threshold } => {
            let s = sr_scores(m, xc)?;
            (0..s.values.len()).filter(|&j| s.values[j] > *threshold).collect()
        }
        SelectionSpec::Sparse { .. } => m.active_variables(),
    };
    if keep.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(keep)
}
