//! Learnable preprocessing.
//!
//! Variable-wise kinds learn means/scales from the build rows only and
//! replay them on any other rows. Row-internal kinds learn nothing: each
//! row is transformed with its own statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreprocSpec {
    #[default]
    None,
    MeanCenter,
    Autoscale,
    RowNormalize,
    /// Per-row centring inside each interval. `boundaries` holds the first
    /// column of every interval, starting at 0 and strictly increasing.
    IntervalCenter { boundaries: Vec<usize> },
}

impl PreprocSpec {
    pub fn is_row_internal(&self) -> bool {
        matches!(self, PreprocSpec::RowNormalize | PreprocSpec::IntervalCenter { .. })
    }

    fn check_boundaries(&self, n_vars: usize) -> Result<()> {
        if let PreprocSpec::IntervalCenter { boundaries } = self {
            let ok = boundaries.first() == Some(&0)
                && boundaries.windows(2).all(|w| w[0] < w[1])
                && boundaries.last().is_some_and(|&b| b < n_vars);
            if !ok {
                return Err(Error::invalid(format!(
                    "interval boundaries {boundaries:?} do not partition {n_vars} variables"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPreproc {
    pub kind: PreprocSpec,
    pub n_vars: usize,
    /// Present for variable-wise kinds only.
    pub means: Option<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
}

impl FittedPreproc {
    /// Pass-through transform for `n_vars` columns.
    pub fn identity(n_vars: usize) -> Self {
        Self {
            kind: PreprocSpec::None,
            n_vars,
            means: None,
            scales: None,
        }
    }

    /// Undoes a variable-wise transform (used to return predictions to
    /// response units).
    pub fn invert(&self, m: &Matrix) -> Result<Matrix> {
        self.check_width(m)?;
        match (&self.means, &self.scales) {
            (Some(means), Some(scales)) => Ok(m.map_rows(|row| {
                for ((v, mu), s) in row.iter_mut().zip(means).zip(scales) {
                    *v = *v * s + mu;
                }
            })),
            _ if self.kind == PreprocSpec::None => Ok(m.clone()),
            _ => Err(Error::invalid(format!(
                "{:?} preprocessing cannot be inverted",
                self.kind
            ))),
        }
    }

    fn check_width(&self, m: &Matrix) -> Result<()> {
        if m.cols() != self.n_vars {
            return Err(Error::shape(format!(
                "preprocessing fitted on {} columns applied to {}",
                self.n_vars,
                m.cols()
            )));
        }
        Ok(())
    }
}

/// Learns preprocessing parameters from build rows.
pub fn fit_preproc(spec: &PreprocSpec, x_build: &Matrix) -> Result<FittedPreproc> {
    if x_build.rows() == 0 || x_build.cols() == 0 {
        return Err(Error::invalid("cannot fit preprocessing on an empty block"));
    }
    spec.check_boundaries(x_build.cols())?;
    let n_vars = x_build.cols();
    let (means, scales) = match spec {
        PreprocSpec::None | PreprocSpec::RowNormalize | PreprocSpec::IntervalCenter { .. } => {
            (None, None)
        }
        PreprocSpec::MeanCenter => (Some(x_build.column_means()), Some(vec![1.0; n_vars])),
        PreprocSpec::Autoscale => {
            if x_build.rows() < 2 {
                return Err(Error::degenerate("autoscale needs at least two rows"));
            }
            let sds = x_build.column_sds();
            if let Some(j) = sds.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::degenerate(format!(
                    "zero-variance column {j} under autoscale"
                )));
            }
            (Some(x_build.column_means()), Some(sds))
        }
    };
    Ok(FittedPreproc {
        kind: spec.clone(),
        n_vars,
        means,
        scales,
    })
}

/// Applies fitted parameters to any rows. Depends only on `fp` and `x`.
pub fn apply_preproc(fp: &FittedPreproc, x: &Matrix) -> Result<Matrix> {
    fp.check_width(x)?;
    let out = match &fp.kind {
        PreprocSpec::None => x.clone(),
        PreprocSpec::MeanCenter | PreprocSpec::Autoscale => {
            let (Some(means), Some(scales)) = (&fp.means, &fp.scales) else {
                return Err(Error::invalid("variable-wise preprocessing without parameters"));
            };
            x.map_rows(|row| {
                for ((v, mu), s) in row.iter_mut().zip(means).zip(scales) {
                    *v = (*v - mu) / s;
                }
            })
        }
        PreprocSpec::RowNormalize => x.map_rows(|row| {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }),
        PreprocSpec::IntervalCenter { boundaries } => {
            let mut ends: Vec<usize> = boundaries[1..].to_vec();
            ends.push(fp.n_vars);
            x.map_rows(|row| {
                for (&start, &end) in boundaries.iter().zip(&ends) {
                    let seg = &mut row[start..end];
                    let m = seg.iter().sum::<f64>() / seg.len() as f64;
                    seg.iter_mut().for_each(|v| *v -= m);
                }
            })
        }
    };
    Ok(out)
}
