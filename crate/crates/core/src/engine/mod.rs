//! Validation orchestration around double cross-validation.

mod access;
mod bootstrap;
mod compare;
mod cv;
mod permutation;
mod pipeline;
mod report;
mod scoring;

pub use access::{
    firewall_violations, AccessEvent, AccessProbe, DataAccess, RecordingProbe, Scope, Stage,
};
pub use bootstrap::{bootstrap_metric, BootstrapSummary};
pub use compare::{compare_models, wilcoxon_signed_rank, ComparisonResult};
pub use cv::{
    double_cv, double_cv_leaky, double_cv_with, inner_cv_select, naive_class_baseline,
    zero_lv_baseline, CurvePoint, InnerSelection,
};
pub use permutation::{
    permutation_null, permutation_null_with, permute_rows, Block as PermutedBlock, NullResult,
};
pub use pipeline::{fit_pipeline, FittedPipeline};
pub use report::{
    quantile, FoldResult, RepetitionResult, Summary, ValidationReport, LEAKAGE_WATERMARK,
    REPORT_SCHEMA_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricSpec;
use crate::pls::SelectionSpec;
use crate::preproc::PreprocSpec;
use crate::split::SplitPolicy;

pub const DEFAULT_DISCLOSURE: &str =
    "single-block data split; independence holds only for operations after splitting";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Pls,
    Plsda,
    SparsePls,
    SparsePlsda,
}

impl ModelKind {
    pub fn is_discriminant(self) -> bool {
        matches!(self, ModelKind::Plsda | ModelKind::SparsePlsda)
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, ModelKind::SparsePls | ModelKind::SparsePlsda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub name: String,
    #[serde(default = "mean_center")]
    pub x_preproc: PreprocSpec,
    /// Ignored by discriminant models, whose dummy block is always mean-centred.
    #[serde(default = "mean_center")]
    pub y_preproc: PreprocSpec,
    pub model: ModelKind,
    /// Must contain 0 so the mean-only model is always a candidate.
    pub n_lv_grid: Vec<usize>,
    /// Selection settings searched alongside `n_lv_grid`. Sparse models take
    /// `sparse` entries only; dense models take the others.
    #[serde(default = "default_selection_grid")]
    pub selection_grid: Vec<SelectionSpec>,
    pub inner_policy: SplitPolicy,
    pub outer_policy: SplitPolicy,
    pub metric: MetricSpec,
    #[serde(default = "one")]
    pub n_repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Y column holding class labels (discriminant models only).
    #[serde(default)]
    pub class_column: usize,
    #[serde(default = "default_disclosure")]
    pub independence_disclosure: String,
}

fn mean_center() -> PreprocSpec {
    PreprocSpec::MeanCenter
}

fn default_selection_grid() -> Vec<SelectionSpec> {
    vec![SelectionSpec::None]
}

fn one() -> usize {
    1
}

fn default_disclosure() -> String {
    DEFAULT_DISCLOSURE.to_string()
}

/// One candidate meta-parameter setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n_lv: usize,
    pub selection: SelectionSpec,
}

impl PipelineSpec {
    /// A dense regression pipeline with mean centring, random folds and
    /// the given grid; mostly for tests and generators.
    pub fn regression(
        name: &str,
        n_lv_grid: Vec<usize>,
        metric: MetricSpec,
        outer: SplitPolicy,
        inner: SplitPolicy,
    ) -> Self {
        Self {
            name: name.to_string(),
            x_preproc: PreprocSpec::MeanCenter,
            y_preproc: PreprocSpec::MeanCenter,
            model: ModelKind::Pls,
            n_lv_grid,
            selection_grid: default_selection_grid(),
            inner_policy: inner,
            outer_policy: outer,
            metric,
            n_repetitions: 1,
            seed: 0,
            class_column: 0,
            independence_disclosure: default_disclosure(),
        }
    }

    /// Checks internal consistency; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::invalid(format!("{field}: {msg}")));
        if self.name.is_empty() {
            return bad("name", "must not be empty".into());
        }
        if !self.n_lv_grid.contains(&0) {
            return bad("n_lv_grid", "must contain 0 (the mean-only baseline)".into());
        }
        if self.selection_grid.is_empty() {
            return bad("selection_grid", "must not be empty".into());
        }
        if self.n_repetitions == 0 {
            return bad("n_repetitions", "must be at least 1".into());
        }
        for (i, s) in self.selection_grid.iter().enumerate() {
            let field = format!("selection_grid[{i}]");
            match s {
                SelectionSpec::Sparse { keep_k } => {
                    if !self.model.is_sparse() {
                        return bad(&field, "sparse selection needs a sparse model".into());
                    }
                    if *keep_k == 0 {
                        return bad(&field, "keep_k must be at least 1".into());
                    }
                }
                SelectionSpec::Vip { threshold } | SelectionSpec::Sr { threshold } => {
                    if self.model.is_sparse() {
                        return bad(&field, "sparse models take sparse entries only".into());
                    }
                    if !threshold.is_finite() {
                        return bad(&field, "threshold must be finite".into());
                    }
                }
                SelectionSpec::None => {
                    if self.model.is_sparse() {
                        return bad(&field, "sparse models take sparse entries only".into());
                    }
                }
            }
        }
        if self.model.is_discriminant() == self.metric.name.is_regression() {
            return bad(
                "metric.name",
                format!("{:?} does not suit a {:?} model", self.metric.name, self.model),
            );
        }
        if self.y_preproc.is_row_internal() {
            return bad("y_preproc", "row-internal kinds cannot be used for Y".into());
        }
        for (field, p) in [("outer_policy", &self.outer_policy), ("inner_policy", &self.inner_policy)] {
            if p.n_folds.is_some_and(|k| k < 2) {
                return bad(&format!("{field}.n_folds"), "must be at least 2".into());
            }
        }
        self.metric.validate()
    }

    /// Candidate settings in search order. The 0-LV point appears once,
    /// without selection.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut lvs = self.n_lv_grid.clone();
        lvs.sort_unstable();
        lvs.dedup();
        let mut out = Vec::new();
        for lv in lvs {
            if lv == 0 {
                out.push(GridPoint {
                    n_lv: 0,
                    selection: SelectionSpec::None,
                });
                continue;
            }
            for s in &self.selection_grid {
                out.push(GridPoint {
                    n_lv: lv,
                    selection: s.clone(),
                });
            }
        }
        out
    }
}
