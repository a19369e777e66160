use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapSummary;
use super::cv::CurvePoint;
use super::permutation::Block;
use super::GridPoint;
use crate::metrics::{MetricSpec, Orientation};
use crate::split::SplitPlan;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Stamped on every report produced with selection before splitting.
pub const LEAKAGE_WATERMARK: &str = "INVALID — leakage demonstration";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub chosen: GridPoint,
    pub effective_n_lv: usize,
    pub n_selected: usize,
    pub selection_fallback: bool,
    /// Criterion on this fold alone; `None` when it cannot be computed
    /// (for example q2 on a single row equal to the build mean).
    pub metric: Option<f64>,
    pub inner_curve: Vec<CurvePoint>,
    pub inner_skipped_folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    /// Criterion on the out-of-fold predictions pooled over all outer folds.
    pub metric: f64,
    pub metric_degenerate: bool,
    pub outer_plan: SplitPlan,
    pub folds: Vec<FoldResult>,
    pub model_fits: usize,
    /// Kept out of the JSON so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single repetition.
    pub sd: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let (q1, median, q3) = (quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75));
        Self {
            mean,
            sd,
            median,
            q1,
            q3,
            iqr: q3 - q1,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Linear-interpolation sample quantile (the common "type 7" rule).
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub pipeline: String,
    pub watermark: Option<String>,
    pub metric: MetricSpec,
    pub orientation: Orientation,
    pub n_rows: usize,
    pub n_vars: usize,
    pub seed: u64,
    pub n_repetitions: usize,
    pub per_repetition: Vec<RepetitionResult>,
    pub summary: Summary,
    /// Cross-validated PRESS of the mean-only model (regression only).
    pub baseline_zero_lv: Option<f64>,
    /// Criterion of the build-majority class rule (discriminant only).
    pub baseline_naive_class: Option<f64>,
    pub null_distribution: Option<Vec<f64>>,
    pub p_value_vs_null: Option<f64>,
    pub permutation_block: Option<Block>,
    pub bootstrap: Option<BootstrapSummary>,
    /// Variables chosen on the whole dataset (leaky mode only).
    pub preselected_variables: Option<Vec<usize>>,
    pub independence_disclosure: String,
    pub selection_fallbacks: usize,
    pub skipped_inner_folds: usize,
    pub degenerate_metric_flags: usize,
    pub sr_infinite_flags: usize,
    pub model_fits: usize,
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl ValidationReport {
    pub fn metrics(&self) -> Vec<f64> {
        self.per_repetition.iter().map(|r| r.metric).collect()
    }
}
