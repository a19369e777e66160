//! Single and double cross-validation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::access::{AccessProbe, DataAccess, Scope};
use super::pipeline::{fit_pipeline, FittedPipeline};
use super::report::{
    FoldResult, RepetitionResult, Summary, ValidationReport, LEAKAGE_WATERMARK,
    REPORT_SCHEMA_VERSION,
};
use super::scoring::{score, Pooled, Scored};
use super::{GridPoint, ModelKind, PipelineSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pls::SelectionSpec;
use crate::rng::RngStream;
use crate::split::{make_split, LoopRole, SplitPlan};

// Stream path tags.
const OUTER_SPLIT: u64 = 0;
const INNER_SPLIT: u64 = 1;

/// One inner-loop grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_lv: usize,
    pub selection: SelectionSpec,
    /// `None` when the point failed to fit in some inner fold.
    pub metric: Option<f64>,
    /// Mean count of selected variables over the inner folds.
    pub mean_selected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSelection {
    pub chosen: GridPoint,
    pub curve: Vec<CurvePoint>,
    pub skipped_folds: usize,
    pub selection_fallbacks: usize,
    pub sr_infinite_flags: usize,
    pub fits: usize,
}

/// Picks meta-parameters by cross-validation over `build_rows` of `ds`.
///
/// Inner folds follow `spec.inner_policy`; preprocessing, selection and
/// model fit see only each inner fold's training rows.
pub fn inner_cv_select(
    ds: &Dataset,
    build_rows: &[usize],
    spec: &PipelineSpec,
    rng: &RngStream,
) -> Result<InnerSelection> {
    spec.validate()?;
    let access = DataAccess::new(ds);
    let positive = resolve_positive(&access, spec)?;
    inner_select(&access, Scope::WHOLE, build_rows, spec, positive, rng)
}

/// Held-out rows' inputs and truth, read once per fold.
struct HeldOut<'a> {
    rows: &'a [usize],
    x: Matrix,
    truth: Matrix,
}

fn pool(
    spec: &PipelineSpec,
    fitted: &FittedPipeline,
    held: &HeldOut,
    build_mean: &[f64],
    positive: Option<f64>,
) -> Result<Pooled> {
    let pred = fitted.predict(&held.x)?;
    let mut out = Pooled {
        rows: held.rows.to_vec(),
        ..Pooled::default()
    };
    for i in 0..pred.rows() {
        let row = pred.row(i);
        if let Some(classes) = &fitted.classes {
            out.pred.push(vec![classes[crate::pls::argmax(row)]]);
            // A class absent from the build rows has an all-zero dummy column.
            let pos_col = positive.and_then(|p| classes.iter().position(|&c| c == p));
            out.pos_score.push(pos_col.map_or(0.0, |c| row[c]));
            out.truth.push(vec![held.truth.get(i, spec.class_column)]);
        } else {
            out.pred.push(row.to_vec());
            out.baseline.push(build_mean.to_vec());
            out.truth.push(held.truth.row(i).to_vec());
        }
    }
    Ok(out)
}

fn read_held_out<'a>(access: &DataAccess, scope: Scope, rows: &'a [usize]) -> Result<HeldOut<'a>> {
    let x = access.predictors(scope, rows)?;
    let truth = access.truth(scope, rows)?;
    Ok(HeldOut { rows, x, truth })
}

/// Positive class for binary criteria: the configured label, else the
/// largest label in the class column.
fn resolve_positive(access: &DataAccess, spec: &PipelineSpec) -> Result<Option<f64>> {
    if !spec.model.is_discriminant() {
        return Ok(None);
    }
    if let Some(p) = spec.metric.positive_class {
        return Ok(Some(p));
    }
    let all: Vec<usize> = (0..access.n_rows()).collect();
    let labels = access.labels(Scope::WHOLE, &all, spec.class_column)?;
    Ok(labels.into_iter().reduce(f64::max))
}

fn map_rows(local: &[usize], build_rows: &[usize]) -> Vec<usize> {
    local.iter().map(|&i| build_rows[i]).collect()
}

pub(crate) fn inner_select(
    access: &DataAccess,
    scope: Scope,
    build_rows: &[usize],
    spec: &PipelineSpec,
    positive: Option<f64>,
    rng: &RngStream,
) -> Result<InnerSelection> {
    let view = access.split_view(scope, build_rows)?;
    let plan = make_split(&spec.inner_policy, &view, LoopRole::Inner, rng)?;
    let grid = spec.grid();
    let mut pooled: Vec<Option<Pooled>> = vec![Some(Pooled::default()); grid.len()];
    let mut selected: Vec<Vec<usize>> = vec![Vec::new(); grid.len()];
    let (mut skipped, mut fallbacks, mut sr_flags, mut fits) = (0, 0, 0, 0);
    for g in 0..plan.n_folds() {
        let train = map_rows(&plan.build_rows(g), build_rows);
        let valid = map_rows(&plan.test_rows(g), build_rows);
        if train.len() < 2 || valid.is_empty() {
            skipped += 1;
            continue;
        }
        let s = scope.inner(g);
        let block = access.build(s, &train)?;
        let fitted: Vec<Result<FittedPipeline>> = grid
            .par_iter()
            .map(|pt| fit_pipeline(spec, pt, &block.x, &block.y))
            .collect();
        // The mean-only point fails only when the fold itself is degenerate
        // (zero-variance column under autoscale, a single class).
        if matches!(fitted[0], Err(Error::Degenerate(_))) {
            skipped += 1;
            continue;
        }
        let mean = block.y.column_means();
        let held = read_held_out(access, s, &valid)?;
        for (i, f) in fitted.into_iter().enumerate() {
            let slot = &mut pooled[i];
            match (f, slot.as_mut()) {
                (Ok(f), Some(acc)) => {
                    fits += f.fits;
                    fallbacks += usize::from(f.selection_fallback);
                    sr_flags += f.sr_infinite;
                    selected[i].push(f.n_selected);
                    acc.extend(pool(spec, &f, &held, &mean, positive)?);
                }
                (Err(e @ (Error::Shape(_) | Error::Io { .. })), _) => return Err(e),
                _ => *slot = None,
            }
        }
    }
    if skipped == plan.n_folds() {
        return Err(Error::degenerate("every inner fold was degenerate"));
    }
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, pt) in grid.iter().enumerate() {
        let value = pooled[i]
            .as_ref()
            .and_then(|p| score(spec, p, positive).ok())
            .map(|s: Scored| s.value)
            .filter(|v| v.is_finite());
        let mean_sel = (!selected[i].is_empty())
            .then(|| selected[i].iter().sum::<usize>() as f64 / selected[i].len() as f64);
        if let (Some(v), Some(ms)) = (value, mean_sel) {
            let take = match best {
                None => true,
                Some((b, bv, bs)) => {
                    spec.metric.better(v, bv)
                        || (v == bv
                            && (pt.n_lv < grid[b].n_lv || (pt.n_lv == grid[b].n_lv && ms < bs)))
                }
            };
            if take {
                best = Some((i, v, ms));
            }
        }
        curve.push(CurvePoint {
            n_lv: pt.n_lv,
            selection: pt.selection.clone(),
            metric: value,
            mean_selected: mean_sel,
        });
    }
    let (b, _, _) = best.ok_or_else(|| Error::degenerate("no grid point could be evaluated"))?;
    Ok(InnerSelection {
        chosen: grid[b].clone(),
        curve,
        skipped_folds: skipped,
        selection_fallbacks: fallbacks,
        sr_infinite_flags: sr_flags,
        fits,
    })
}

/// Everything one outer fold contributes.
struct FoldOutcome {
    result: FoldResult,
    pooled: Pooled,
    fits: usize,
    fallbacks: usize,
    sr_flags: usize,
    seconds: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_outer_fold(
    access: &DataAccess,
    spec: &PipelineSpec,
    plan: &SplitPlan,
    repetition: usize,
    fold: usize,
    positive: Option<f64>,
    root: &RngStream,
) -> Result<FoldOutcome> {
    let start = Instant::now();
    let scope = Scope::outer(repetition, fold);
    let build_rows = plan.build_rows(fold);
    let test_rows = plan.test_rows(fold);
    let rng = root.derive(&[repetition as u64, INNER_SPLIT, fold as u64]);
    let sel = inner_select(access, scope, &build_rows, spec, positive, &rng)?;
    let block = access.build(scope, &build_rows)?;
    let fitted = fit_pipeline(spec, &sel.chosen, &block.x, &block.y)?;
    let mean = block.y.column_means();
    let held = read_held_out(access, scope, &test_rows)?;
    let pooled = pool(spec, &fitted, &held, &mean, positive)?;
    let metric = score(spec, &pooled, positive).ok().map(|s| s.value);
    Ok(FoldOutcome {
        result: FoldResult {
            fold,
            n_test: test_rows.len(),
            chosen: sel.chosen,
            effective_n_lv: fitted.effective_n_lv,
            n_selected: fitted.n_selected,
            selection_fallback: fitted.selection_fallback,
            metric,
            inner_curve: sel.curve,
            inner_skipped_folds: sel.skipped_folds,
        },
        pooled,
        fits: sel.fits + fitted.fits,
        fallbacks: sel.selection_fallbacks + usize::from(fitted.selection_fallback),
        sr_flags: sel.sr_infinite_flags + fitted.sr_infinite,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn outer_plan(access: &DataAccess, spec: &PipelineSpec, repetition: usize) -> Result<SplitPlan> {
    let all: Vec<usize> = (0..access.n_rows()).collect();
    let scope = Scope {
        repetition,
        outer_fold: None,
        inner_fold: None,
        baseline: false,
    };
    let view = access.split_view(scope, &all)?;
    let rng = RngStream::from_seed(spec.seed).derive(&[repetition as u64, OUTER_SPLIT]);
    make_split(&spec.outer_policy, &view, LoopRole::Outer, &rng)
}

/// Repeated double cross-validation of `spec` on `ds`.
pub fn double_cv(ds: &Dataset, spec: &PipelineSpec) -> Result<ValidationReport> {
    double_cv_with(ds, spec, None)
}

/// [`double_cv`] with every row read reported to `probe`.
pub fn double_cv_with(
    ds: &Dataset,
    spec: &PipelineSpec,
    probe: Option<&dyn AccessProbe>,
) -> Result<ValidationReport> {
    spec.validate()?;
    ds.require_y()?;
    let access = match probe {
        Some(p) => DataAccess::with_probe(ds, p),
        None => DataAccess::new(ds),
    };
    let positive = resolve_positive(&access, spec)?;
    let root = RngStream::from_seed(spec.seed);
    let plans: Vec<SplitPlan> = (0..spec.n_repetitions)
        .map(|r| outer_plan(&access, spec, r))
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> = plans
        .iter()
        .enumerate()
        .flat_map(|(r, p)| (0..p.n_folds()).map(move |f| (r, f)))
        .collect();
    let outcomes: Vec<FoldOutcome> = tasks
        .par_iter()
        .map(|&(r, f)| run_outer_fold(&access, spec, &plans[r], r, f, positive, &root))
        .collect::<Result<_>>()?;

    let mut reps = Vec::with_capacity(spec.n_repetitions);
    let (mut fallbacks, mut skipped, mut degenerate, mut sr_flags) = (0, 0, 0, 0);
    let mut outcomes = outcomes.into_iter();
    for (r, plan) in plans.into_iter().enumerate() {
        let mut pooled = Pooled::default();
        let mut folds = Vec::new();
        let (mut fits, mut seconds) = (0, 0.0);
        for o in outcomes.by_ref().take(plan.n_folds()) {
            pooled.extend(o.pooled);
            fits += o.fits;
            seconds += o.seconds;
            fallbacks += o.fallbacks;
            sr_flags += o.sr_flags;
            skipped += o.result.inner_skipped_folds;
            folds.push(o.result);
        }
        let scored = score(spec, &pooled, positive)?;
        degenerate += usize::from(scored.degenerate);
        reps.push(RepetitionResult {
            repetition: r,
            metric: scored.value,
            metric_degenerate: scored.degenerate,
            outer_plan: plan,
            folds,
            model_fits: fits,
            wall_clock_seconds: seconds,
        });
    }
    let values: Vec<f64> = reps.iter().map(|r| r.metric).collect();
    let (baseline_zero_lv, baseline_naive_class) = if spec.model.is_discriminant() {
        (None, Some(naive_class_on(&access, spec, &reps[0].outer_plan, positive)?))
    } else {
        (Some(zero_lv_on(&access, spec, &reps[0].outer_plan)?), None)
    };
    Ok(ValidationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        pipeline: spec.name.clone(),
        watermark: None,
        metric: spec.metric.clone(),
        orientation: spec.metric.orientation(),
        n_rows: ds.n_rows(),
        n_vars: ds.n_vars(),
        seed: spec.seed,
        n_repetitions: spec.n_repetitions,
        summary: Summary::of(&values),
        baseline_zero_lv,
        baseline_naive_class,
        null_distribution: None,
        p_value_vs_null: None,
        permutation_block: None,
        bootstrap: None,
        preselected_variables: None,
        independence_disclosure: spec.independence_disclosure.clone(),
        selection_fallbacks: fallbacks,
        skipped_inner_folds: skipped,
        degenerate_metric_flags: degenerate,
        sr_infinite_flags: sr_flags,
        model_fits: reps.iter().map(|r| r.model_fits).sum(),
        wall_clock_seconds: reps.iter().map(|r| r.wall_clock_seconds).sum(),
        per_repetition: reps,
    })
}

/// Deliberately invalid variant: variables are selected once on the whole
/// dataset, then a dense pipeline is double-cross-validated on them. The
/// report carries [`LEAKAGE_WATERMARK`].
pub fn double_cv_leaky(
    ds: &Dataset,
    spec: &PipelineSpec,
    probe: Option<&dyn AccessProbe>,
) -> Result<ValidationReport> {
    spec.validate()?;
    let access = match probe {
        Some(p) => DataAccess::with_probe(ds, p),
        None => DataAccess::new(ds),
    };
    let selection = spec
        .selection_grid
        .iter()
        .find(|s| !matches!(s, SelectionSpec::None))
        .cloned()
        .ok_or_else(|| Error::invalid("selection_grid: leaky mode needs a selection method"))?;
    let n_lv = spec
        .n_lv_grid
        .iter()
        .copied()
        .filter(|&a| a > 0)
        .min()
        .ok_or_else(|| Error::invalid("n_lv_grid: leaky mode needs a positive entry"))?;
    let block = access.whole_for_selection()?;
    let point = GridPoint { n_lv, selection };
    let fitted = fit_pipeline(spec, &point, &block.x, &block.y)?;
    let keep = if spec.model.is_sparse() {
        fitted.model.active_variables()
    } else {
        fitted.columns.clone()
    };
    let reduced = ds.select_variables(&keep)?;
    let mut dense = spec.clone();
    dense.model = if spec.model.is_discriminant() {
        ModelKind::Plsda
    } else {
        ModelKind::Pls
    };
    dense.selection_grid = vec![SelectionSpec::None];
    let mut report = double_cv_with(&reduced, &dense, probe)?;
    report.watermark = Some(LEAKAGE_WATERMARK.to_string());
    report.n_vars = ds.n_vars();
    report.preselected_variables = Some(keep);
    report.selection_fallbacks += usize::from(fitted.selection_fallback);
    report.model_fits += fitted.fits;
    Ok(report)
}

fn zero_lv_on(access: &DataAccess, spec: &PipelineSpec, plan: &SplitPlan) -> Result<f64> {
    let point = GridPoint {
        n_lv: 0,
        selection: SelectionSpec::None,
    };
    let mut press = 0.0;
    for f in 0..plan.n_folds() {
        let scope = Scope::outer(0, f).for_baseline();
        let block = access.build(scope, &plan.build_rows(f))?;
        let fitted = fit_pipeline(spec, &point, &block.x, &block.y)?;
        let test = plan.test_rows(f);
        let pred = fitted.predict(&access.predictors(scope, &test)?)?;
        let truth = access.truth(scope, &test)?;
        press += truth
            .values()
            .iter()
            .zip(pred.values())
            .map(|(t, p)| (t - p) * (t - p))
            .sum::<f64>();
    }
    if !(press > 0.0) {
        return Err(Error::degenerate("mean-only PRESS is zero (constant response)"));
    }
    Ok(press)
}

/// Cross-validated PRESS of the mean-only model over the first
/// repetition's outer folds.
pub fn zero_lv_baseline(ds: &Dataset, spec: &PipelineSpec) -> Result<f64> {
    spec.validate()?;
    if spec.model.is_discriminant() {
        return Err(Error::invalid("model: the PRESS baseline applies to regression"));
    }
    let access = DataAccess::new(ds);
    let plan = outer_plan(&access, spec, 0)?;
    zero_lv_on(&access, spec, &plan)
}

fn naive_class_on(
    access: &DataAccess,
    spec: &PipelineSpec,
    plan: &SplitPlan,
    positive: Option<f64>,
) -> Result<f64> {
    let mut pooled = Pooled::default();
    for f in 0..plan.n_folds() {
        let scope = Scope::outer(0, f).for_baseline();
        let block = access.build(scope, &plan.build_rows(f))?;
        let labels = block.y.column(spec.class_column);
        let (classes, dummy) = crate::pls::one_hot(&labels)?;
        let counts: Vec<f64> = (0..classes.len()).map(|c| dummy.column(c).iter().sum()).collect();
        let majority = classes[crate::pls::argmax(&counts)];
        let test = plan.test_rows(f);
        let truth = access.truth(scope, &test)?;
        for i in 0..test.len() {
            pooled.rows.push(test[i]);
            pooled.truth.push(vec![truth.get(i, spec.class_column)]);
            pooled.pred.push(vec![majority]);
            pooled.pos_score.push(0.0);
        }
    }
    Ok(score(spec, &pooled, positive)?.value)
}

/// Criterion of always predicting the build-majority class, over the
/// first repetition's outer folds.
pub fn naive_class_baseline(ds: &Dataset, spec: &PipelineSpec) -> Result<f64> {
    spec.validate()?;
    if !spec.model.is_discriminant() {
        return Err(Error::invalid("model: the naive class baseline needs a discriminant model"));
    }
    let access = DataAccess::new(ds);
    let positive = resolve_positive(&access, spec)?;
    let plan = outer_plan(&access, spec, 0)?;
    naive_class_on(&access, spec, &plan, positive)
}
