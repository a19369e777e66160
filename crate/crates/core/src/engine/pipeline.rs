use serde::{Deserialize, Serialize};

use super::{GridPoint, PipelineSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pls::{
    apply_selection, fit_pls, fit_sparse_pls, one_hot, argmax, PlsModel, SelectionSpec,
};
use crate::preproc::{apply_preproc, fit_preproc, FittedPreproc, PreprocSpec};

/// Everything learned from one block of build rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub point: GridPoint,
    /// Latent variables actually fitted after clamping to the data.
    pub effective_n_lv: usize,
    pub x_preproc: FittedPreproc,
    /// Columns of the preprocessed X the model sees.
    pub columns: Vec<usize>,
    /// Variables carrying a nonzero weight (all columns for dense models).
    pub n_selected: usize,
    /// The filter kept nothing and all variables were used instead.
    pub selection_fallback: bool,
    /// Variables flagged with an infinite selectivity ratio.
    pub sr_infinite: usize,
    pub model: PlsModel,
    /// Sorted class labels for discriminant models.
    pub classes: Option<Vec<f64>>,
    /// NIPALS fits performed, selection passes included.
    pub fits: usize,
}

/// Fits the pipeline at `point` on raw build blocks.
pub fn fit_pipeline(
    spec: &PipelineSpec,
    point: &GridPoint,
    x: &Matrix,
    y: &Matrix,
) -> Result<FittedPipeline> {
    let (target, y_spec, classes) = if spec.model.is_discriminant() {
        if spec.class_column >= y.cols() {
            return Err(Error::invalid(format!(
                "class_column {} out of range for {} Y columns",
                spec.class_column,
                y.cols()
            )));
        }
        let (classes, dummy) = one_hot(&y.column(spec.class_column))?;
        if classes.len() < 2 {
            return Err(Error::degenerate("build rows hold a single class"));
        }
        (dummy, PreprocSpec::MeanCenter, Some(classes))
    } else {
        (y.clone(), spec.y_preproc.clone(), None)
    };
    let x_fp = fit_preproc(&spec.x_preproc, x)?;
    let y_fp = fit_preproc(&y_spec, &target)?;
    let xc = apply_preproc(&x_fp, x)?;
    let yc = apply_preproc(&y_fp, &target)?;
    let (n, p) = xc.shape();
    let lv = point.n_lv.min(n.saturating_sub(1)).min(p);

    let mut fits = 0;
    let mut columns: Vec<usize> = (0..p).collect();
    let mut selection_fallback = false;
    let mut sr_infinite = 0;
    let model = match &point.selection {
        _ if lv == 0 => {
            fits += 1;
            fit_pls(&xc, &yc, 0)?
        }
        SelectionSpec::None => {
            fits += 1;
            fit_pls(&xc, &yc, lv)?
        }
        SelectionSpec::Sparse { keep_k } => {
            fits += 1;
            fit_sparse_pls(&xc, &yc, lv, (*keep_k).min(p))?
        }
        filter @ (SelectionSpec::Vip { .. } | SelectionSpec::Sr { .. }) => {
            let full = fit_pls(&xc, &yc, lv)?;
            fits += 1;
            if matches!(filter, SelectionSpec::Sr { .. }) {
                sr_infinite = crate::pls::sr_scores(&full, &xc)?.infinite.len();
            }
            match apply_selection(filter, &xc, &full) {
                Ok(keep) => columns = keep,
                Err(Error::EmptySelection) => selection_fallback = true,
                Err(e) => return Err(e),
            }
            let xs = xc.select_columns(&columns)?;
            fits += 1;
            fit_pls(&xs, &yc, lv.min(columns.len()))?
        }
    };
    let n_selected = if matches!(point.selection, SelectionSpec::Sparse { .. }) && model.n_lv > 0 {
        model.active_variables().len()
    } else {
        columns.len()
    };
    let model = model.with_preproc(FittedPreproc::identity(columns.len()), y_fp);
    Ok(FittedPipeline {
        point: point.clone(),
        effective_n_lv: model.n_lv,
        x_preproc: x_fp,
        columns,
        n_selected,
        selection_fallback,
        sr_infinite,
        model,
        classes,
        fits,
    })
}

impl FittedPipeline {
    /// Predicted responses (dummy scores for discriminant models) in
    /// original units.
    pub fn predict(&self, x_raw: &Matrix) -> Result<Matrix> {
        let xc = apply_preproc(&self.x_preproc, x_raw)?;
        self.model.predict(&xc.select_columns(&self.columns)?)
    }

    /// Class by argmax of the predicted dummy columns, ties to the lower class.
    pub fn predict_class(&self, x_raw: &Matrix) -> Result<Vec<f64>> {
        let classes = self
            .classes
            .as_ref()
            .ok_or_else(|| Error::invalid("not a discriminant pipeline"))?;
        let s = self.predict(x_raw)?;
        Ok((0..s.rows()).map(|i| classes[argmax(s.row(i))]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ModelKind;
    use crate::metrics::{MetricName, MetricSpec};
    use crate::rng::{standard_normal_matrix, RngStream};
    use crate::split::SplitPolicy;

    fn spec(model: ModelKind, metric: MetricName) -> PipelineSpec {
        let mut s = PipelineSpec::regression(
            "t",
            vec![0, 1, 2],
            MetricSpec::new(metric),
            SplitPolicy::random(2),
            SplitPolicy::random(2),
        );
        s.model = model;
        s
    }

    #[test]
    fn zero_lv_predicts_build_mean() {
        let x = standard_normal_matrix(&RngStream::from_seed(1), 6, 3).unwrap();
        let y = Matrix::column_vector(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let point = GridPoint { n_lv: 0, selection: SelectionSpec::None };
        let f = fit_pipeline(&spec(ModelKind::Pls, MetricName::Press), &point, &x, &y).unwrap();
        let pred = f.predict(&standard_normal_matrix(&RngStream::from_seed(2), 2, 3).unwrap()).unwrap();
        assert!(pred.values().iter().all(|&v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn empty_filter_falls_back_to_all_variables() {
        let x = standard_normal_matrix(&RngStream::from_seed(3), 6, 1).unwrap();
        let y = standard_normal_matrix(&RngStream::from_seed(4), 6, 1).unwrap();
        let point = GridPoint { n_lv: 1, selection: SelectionSpec::Vip { threshold: 1.0 } };
        let f = fit_pipeline(&spec(ModelKind::Pls, MetricName::Press), &point, &x, &y).unwrap();
        assert!(f.selection_fallback);
        assert_eq!(f.columns, vec![0]);
        assert_eq!(f.fits, 2);
    }

    #[test]
    fn lv_clamped_to_selected_columns() {
        let r = RngStream::from_seed(5);
        let x = standard_normal_matrix(&r.derive(&[0]), 10, 6).unwrap();
        let y = Matrix::column_vector(x.column(2)).unwrap();
        let point = GridPoint { n_lv: 5, selection: SelectionSpec::Vip { threshold: 1.0 } };
        let f = fit_pipeline(&spec(ModelKind::Pls, MetricName::Press), &point, &x, &y).unwrap();
        assert!(f.effective_n_lv <= f.columns.len());
        assert!(f.columns.contains(&2));
    }

    #[test]
    fn discriminant_pipeline_classifies_separated_data() {
        let x = Matrix::column_vector(vec![-2.0, -1.5, -1.0, 1.0, 1.5, 2.0]).unwrap();
        let y = Matrix::column_vector(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let point = GridPoint { n_lv: 1, selection: SelectionSpec::None };
        let f = fit_pipeline(&spec(ModelKind::Plsda, MetricName::Nmc), &point, &x, &y).unwrap();
        assert_eq!(f.predict_class(&x).unwrap(), y.column(0));
        let one = Matrix::column_vector(vec![1.0; 6]).unwrap();
        assert!(matches!(
            fit_pipeline(&spec(ModelKind::Plsda, MetricName::Nmc), &point, &x, &one),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn sparse_counts_active_variables() {
        let r = RngStream::from_seed(6);
        let x = standard_normal_matrix(&r.derive(&[0]), 12, 8).unwrap();
        let y = standard_normal_matrix(&r.derive(&[1]), 12, 1).unwrap();
        let point = GridPoint { n_lv: 2, selection: SelectionSpec::Sparse { keep_k: 2 } };
        let f = fit_pipeline(&spec(ModelKind::SparsePls, MetricName::Press), &point, &x, &y).unwrap();
        assert!(f.n_selected <= 4 && f.n_selected >= 2);
    }
}
