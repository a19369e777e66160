//! NIPALS partial least squares with its variants and importance filters.

mod importance;

pub use importance::{apply_selection, sr_scores, vip_scores, SelectionSpec, SrScores};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::preproc::{apply_preproc, fit_preproc, FittedPreproc, PreprocSpec};

/// Relative change in the score vector below which NIPALS stops.
pub const NIPALS_TOLERANCE: f64 = 1e-12;
pub const NIPALS_MAX_ITER: usize = 500;

/// A fitted PLS model. Column `a` of every block belongs to component `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlsModel {
    pub n_lv: usize,
    /// X weights, vars × A.
    pub weights: Matrix,
    /// X loadings, vars × A.
    pub x_loadings: Matrix,
    /// Y loadings, y_vars × A.
    pub y_loadings: Matrix,
    /// Build-row scores, rows × A.
    pub scores: Matrix,
    /// Regression coefficients on the preprocessed scale, vars × y_vars.
    pub coefficients: Matrix,
    pub x_preproc: FittedPreproc,
    pub y_preproc: FittedPreproc,
}

/// Fits PLS on already preprocessed blocks.
pub fn fit_pls(xc: &Matrix, yc: &Matrix, n_lv: usize) -> Result<PlsModel> {
    nipals(xc, yc, n_lv, None)
}

/// Sparse PLS: NIPALS whose weight vector keeps only its `keep_k` largest
/// magnitudes at every iteration.
pub fn fit_sparse_pls(xc: &Matrix, yc: &Matrix, n_lv: usize, keep_k: usize) -> Result<PlsModel> {
    if keep_k == 0 || keep_k > xc.cols() {
        return Err(Error::invalid(format!(
            "keep_k = {keep_k} outside 1..={}",
            xc.cols()
        )));
    }
    nipals(xc, yc, n_lv, Some(keep_k))
}

/// Fits preprocessing on the raw build blocks, then (sparse) PLS.
pub fn fit_pls_preprocessed(
    x: &Matrix,
    y: &Matrix,
    x_spec: &PreprocSpec,
    y_spec: &PreprocSpec,
    n_lv: usize,
    keep_k: Option<usize>,
) -> Result<PlsModel> {
    if y_spec.is_row_internal() {
        return Err(Error::invalid("row-internal preprocessing cannot be used for Y"));
    }
    let x_fp = fit_preproc(x_spec, x)?;
    let y_fp = fit_preproc(y_spec, y)?;
    let xc = apply_preproc(&x_fp, x)?;
    let yc = apply_preproc(&y_fp, y)?;
    let model = match keep_k {
        Some(k) => fit_sparse_pls(&xc, &yc, n_lv, k)?,
        None => fit_pls(&xc, &yc, n_lv)?,
    };
    Ok(model.with_preproc(x_fp, y_fp))
}

fn column_with_largest_variance(y: &Matrix) -> Vec<f64> {
    let sds = y.column_sds();
    let best = (0..y.cols())
        .max_by(|&a, &b| sds[a].total_cmp(&sds[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    y.column(best)
}

/// Zeroes all but the `k` largest-magnitude entries (ties keep the lower index).
fn keep_top_k(w: &mut [f64], k: usize) {
    if k >= w.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    for &j in &idx[k..] {
        w[j] = 0.0;
    }
}

fn nipals(xc: &Matrix, yc: &Matrix, n_lv: usize, keep_k: Option<usize>) -> Result<PlsModel> {
    let (n, p) = xc.shape();
    let m = yc.cols();
    if yc.rows() != n {
        return Err(Error::shape(format!("X has {n} rows, Y has {}", yc.rows())));
    }
    if m == 0 {
        return Err(Error::shape("Y has no columns"));
    }
    let max_lv = n.saturating_sub(1).min(p);
    if n_lv > max_lv {
        return Err(Error::invalid(format!(
            "{n_lv} latent variables requested, at most {max_lv} possible for {n}x{p} data"
        )));
    }
    if n_lv > 0 && xc.values().iter().all(|&v| v == 0.0) {
        return Err(Error::degenerate("X is all zeros"));
    }
    let keep_k = keep_k.filter(|&k| k < p);

    let mut x = xc.clone();
    let mut y = yc.clone();
    let mut weights = Matrix::zeros(p, n_lv);
    let mut x_loadings = Matrix::zeros(p, n_lv);
    let mut y_loadings = Matrix::zeros(m, n_lv);
    let mut scores = Matrix::zeros(n, n_lv);

    for a in 0..n_lv {
        let mut u = column_with_largest_variance(&y);
        let mut t_prev: Option<Vec<f64>> = None;
        let mut iter = 0;
        let (w, t, q) = loop {
            iter += 1;
            let mut w = x.tr_mul_vec(&u);
            if let Some(k) = keep_k {
                keep_top_k(&mut w, k);
            }
            let wn = norm(&w);
            if !(wn > 0.0) {
                return Err(Error::degenerate(format!(
                    "component {} has a zero weight vector (X or Y exhausted)",
                    a + 1
                )));
            }
            w.iter_mut().for_each(|v| *v /= wn);
            let t = x.mul_vec(&w);
            let tt = dot(&t, &t);
            if !(tt > 0.0) {
                return Err(Error::degenerate(format!("component {} has zero scores", a + 1)));
            }
            let q: Vec<f64> = y.tr_mul_vec(&t).into_iter().map(|v| v / tt).collect();
            // A single response is its own fixed point after one pass.
            let converged = m == 1
                || t_prev.as_ref().is_some_and(|prev| {
                    let diff: f64 = t.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum();
                    diff.sqrt() < NIPALS_TOLERANCE * tt.sqrt()
                });
            let qq = dot(&q, &q);
            if converged || !(qq > 0.0) || iter >= NIPALS_MAX_ITER {
                break (w, t, q);
            }
            u = y.mul_vec(&q).into_iter().map(|v| v / qq).collect();
            t_prev = Some(t);
        };
        let tt = dot(&t, &t);
        let p_a: Vec<f64> = x.tr_mul_vec(&t).into_iter().map(|v| v / tt).collect();
        x.sub_outer(&t, &p_a);
        y.sub_outer(&t, &q);
        weights.set_column(a, &w);
        x_loadings.set_column(a, &p_a);
        y_loadings.set_column(a, &q);
        scores.set_column(a, &t);
    }

    let coefficients = if n_lv == 0 {
        Matrix::zeros(p, m)
    } else {
        let ptw = x_loadings.transpose().matmul(&weights)?;
        let inner = ptw.solve(&y_loadings.transpose())?;
        weights.matmul(&inner)?
    };
    Ok(PlsModel {
        n_lv,
        weights,
        x_loadings,
        y_loadings,
        scores,
        coefficients,
        x_preproc: FittedPreproc::identity(p),
        y_preproc: FittedPreproc::identity(m),
    })
}

impl PlsModel {
    pub fn with_preproc(mut self, x_preproc: FittedPreproc, y_preproc: FittedPreproc) -> Self {
        self.x_preproc = x_preproc;
        self.y_preproc = y_preproc;
        self
    }

    pub fn n_vars(&self) -> usize {
        self.coefficients.rows()
    }

    pub fn n_responses(&self) -> usize {
        self.coefficients.cols()
    }

    /// Predictions in original response units.
    pub fn predict(&self, x_raw: &Matrix) -> Result<Matrix> {
        if x_raw.cols() != self.n_vars() {
            return Err(Error::shape(format!(
                "model expects {} columns, got {}",
                self.n_vars(),
                x_raw.cols()
            )));
        }
        let xc = apply_preproc(&self.x_preproc, x_raw)?;
        self.y_preproc.invert(&xc.matmul(&self.coefficients)?)
    }

    /// Indices of variables with a nonzero weight in any component.
    pub fn active_variables(&self) -> Vec<usize> {
        (0..self.weights.rows())
            .filter(|&j| self.weights.row(j).iter().any(|&w| w != 0.0))
            .collect()
    }
}

/// One-hot coding of class labels; classes are the sorted distinct labels.
pub fn one_hot(labels: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    let mut classes: Vec<f64> = labels.to_vec();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let mut dummy = Matrix::zeros(labels.len(), classes.len());
    for (i, l) in labels.iter().enumerate() {
        let c = class_index(&classes, *l)
            .ok_or_else(|| Error::invalid(format!("label {l} is not finite")))?;
        dummy.set(i, c, 1.0);
    }
    Ok((classes, dummy))
}

fn class_index(classes: &[f64], label: f64) -> Option<usize> {
    classes.iter().position(|&c| c == label)
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// PLS on a centred one-hot dummy block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlsDaModel {
    pub classes: Vec<f64>,
    pub pls: PlsModel,
}

/// PLS-DA on an already preprocessed X.
pub fn fit_plsda(xc: &Matrix, labels: &[f64], n_lv: usize) -> Result<PlsDaModel> {
    fit_plsda_preprocessed(xc, labels, &PreprocSpec::None, n_lv, None)
}

pub fn fit_plsda_preprocessed(
    x: &Matrix,
    labels: &[f64],
    x_spec: &PreprocSpec,
    n_lv: usize,
    keep_k: Option<usize>,
) -> Result<PlsDaModel> {
    if labels.len() != x.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} rows",
            labels.len(),
            x.rows()
        )));
    }
    let (classes, dummy) = one_hot(labels)?;
    if classes.len() < 2 {
        return Err(Error::degenerate("PLS-DA needs at least two classes"));
    }
    let pls = fit_pls_preprocessed(x, &dummy, x_spec, &PreprocSpec::MeanCenter, n_lv, keep_k)?;
    Ok(PlsDaModel { classes, pls })
}

impl PlsDaModel {
    /// Predicted dummy block, one column per class.
    pub fn predict_scores(&self, x_raw: &Matrix) -> Result<Matrix> {
        self.pls.predict(x_raw)
    }

    pub fn predict_class(&self, x_raw: &Matrix) -> Result<Vec<f64>> {
        let s = self.predict_scores(x_raw)?;
        Ok((0..s.rows()).map(|i| self.classes[argmax(s.row(i))]).collect())
    }
}
