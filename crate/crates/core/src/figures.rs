//! The simulated experiments behind each figure, and their plot data.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::engine::{
    compare_models, double_cv, double_cv_leaky, inner_cv_select, CurvePoint, InnerSelection, ModelKind,
    PipelineSpec, ValidationReport,
};
use crate::error::{Error, Result};
use crate::metrics::{classification_counts, nmc, roc_curve, wmc, MetricName, MetricSpec, Orientation, RocCurve};
use crate::plotdata::{PlotData, PlotKind};
use crate::pls::SelectionSpec;
use crate::rng::RngStream;
use crate::simgen::{
    gen_classifier_scores, gen_fig4, gen_fig5, gen_fig6, DEFAULT_DISCRIMINABILITY, FIG6_NOISE_SD,
};
use crate::split::{SplitKind, SplitPolicy};

pub const ROC_REPLICATES: usize = 10;
pub const SCORE_ROWS: usize = 1000;
/// Seeds per statistical summary (`seed`, `seed + 1`, ...).
pub const SEEDS_PER_SUMMARY: u64 = 20;

/// VIP threshold used by both variable-selection schemes of the
/// high-dimensional null example.
pub const FIG5_VIP_THRESHOLD: f64 = 2.0;
pub const FIG5_MAX_LV: usize = 3;
pub const FIG6_REPETITIONS: usize = 10;

// Stream tags, one per experiment.
const TAG_ROC: u64 = 1;
const TAG_COSTS: u64 = 2;
const TAG_NULL_CURVE: u64 = 4;
const TAG_HIGHDIM: u64 = 5;
const TAG_INFORMATIVE: u64 = 6;

/// `ROC_REPLICATES` ROC curves of the simulated classifier on fresh test sets.
pub fn roc_replicates(seed: u64, minority_fraction: f64) -> Result<Vec<RocCurve>> {
    let base = RngStream::from_seed(seed).derive(&[TAG_ROC, (minority_fraction * 1e6).round() as u64]);
    (0..ROC_REPLICATES)
        .map(|r| {
            let (labels, scores) = gen_classifier_scores(
                SCORE_ROWS,
                minority_fraction,
                DEFAULT_DISCRIMINABILITY,
                &base.derive(&[r as u64]),
            )?;
            roc_curve(&scores, &labels, 1.0)
        })
        .collect()
}

/// Misclassification counts and costs at 1% minority for one test set.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ThresholdCosts {
    pub positives: usize,
    /// Classifier at threshold 0.5.
    pub nmc_classifier: f64,
    /// Always predicting the negative class.
    pub nmc_naive: f64,
    pub wmc_threshold_07: f64,
    pub wmc_threshold_099: f64,
    pub wmc_naive: f64,
}

pub fn threshold_costs(seed: u64) -> Result<ThresholdCosts> {
    let rng = RngStream::from_seed(seed).derive(&[TAG_COSTS]);
    let (labels, scores) = gen_classifier_scores(SCORE_ROWS, 0.01, DEFAULT_DISCRIMINABILITY, &rng)?;
    let at = |t: f64| -> Vec<f64> { scores.iter().map(|&s| f64::from(u8::from(s > t))).collect() };
    let naive = vec![0.0; labels.len()];
    let c05 = classification_counts(&labels, &at(0.5), 1.0)?;
    let c07 = classification_counts(&labels, &at(0.7), 1.0)?;
    let c099 = classification_counts(&labels, &at(0.99), 1.0)?;
    let cn = classification_counts(&labels, &naive, 1.0)?;
    let spec = MetricSpec::new(MetricName::Wmc);
    Ok(ThresholdCosts {
        positives: cn.fn_,
        nmc_classifier: nmc(&c05) as f64,
        nmc_naive: nmc(&cn) as f64,
        wmc_threshold_07: wmc(&c07, spec.w_fp, spec.w_fn),
        wmc_threshold_099: wmc(&c099, spec.w_fp, spec.w_fn),
        wmc_naive: wmc(&cn, spec.w_fp, spec.w_fn),
    })
}

/// Leave-one-out PRESS curve over 0..=10 components on the 20×10 null data.
pub fn null_cv_curve(seed: u64) -> Result<InnerSelection> {
    let rng = RngStream::from_seed(seed).derive(&[TAG_NULL_CURVE]);
    let ds = gen_fig4(&rng.derive(&[0]))?;
    let spec = PipelineSpec::regression(
        "pls",
        (0..=10).collect(),
        MetricSpec::new(MetricName::Press),
        SplitPolicy::auto(SplitKind::Random),
        SplitPolicy::auto(SplitKind::Random),
    );
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    inner_cv_select(&ds, &rows, &spec, &rng.derive(&[1]))
}

/// Margin by which a component model must undercut the 0-LV PRESS to
/// count as predictive on null data.
pub const NULL_CURVE_MARGIN: f64 = 0.05;

/// Whether any positive component count beats the 0-LV PRESS by more than
/// the fraction `margin`.
pub fn curve_beats_baseline(sel: &InnerSelection, margin: f64) -> bool {
    let p0 = sel.curve.iter().find(|c| c.n_lv == 0).and_then(|c| c.metric);
    let best = sel.curve.iter().filter(|c| c.n_lv > 0).filter_map(|c| c.metric).reduce(f64::min);
    matches!((p0, best), (Some(p0), Some(b)) if b < (1.0 - margin) * p0)
}

/// VIP-PLS on the 20×1000 null data with leave-one-out in both loops.
pub fn highdim_null_spec(seed: u64) -> PipelineSpec {
    let mut spec = PipelineSpec::regression(
        "vip-pls",
        (0..=FIG5_MAX_LV).collect(),
        MetricSpec::new(MetricName::Q2),
        SplitPolicy::auto(SplitKind::Random),
        SplitPolicy::auto(SplitKind::Random),
    );
    spec.selection_grid = vec![SelectionSpec::Vip {
        threshold: FIG5_VIP_THRESHOLD,
    }];
    spec.seed = seed;
    spec
}

/// Double-CV report on the high-dimensional null example, with selection
/// inside the inner loop or (`leaky`) on the whole dataset first.
pub fn highdim_null_report(seed: u64, leaky: bool) -> Result<ValidationReport> {
    let ds = gen_fig5(&RngStream::from_seed(seed).derive(&[TAG_HIGHDIM]))?;
    let spec = highdim_null_spec(seed);
    if leaky {
        double_cv_leaky(&ds, &spec, None)
    } else {
        double_cv(&ds, &spec)
    }
}

/// PLS, SR-PLS, VIP-PLS and sparse PLS sharing splits and seed.
pub fn informative_specs(seed: u64) -> Vec<PipelineSpec> {
    let base = {
        let mut s = PipelineSpec::regression(
            "pls",
            (0..=5).collect(),
            MetricSpec::new(MetricName::Q2),
            SplitPolicy::random(5),
            SplitPolicy::random(4),
        );
        s.n_repetitions = FIG6_REPETITIONS;
        s.seed = seed;
        s
    };
    let with = |name: &str, model: ModelKind, grid: Vec<SelectionSpec>| {
        let mut s = base.clone();
        s.name = name.to_string();
        s.model = model;
        s.selection_grid = grid;
        s
    };
    vec![
        base.clone(),
        with("sr-pls", ModelKind::Pls, vec![SelectionSpec::Sr { threshold: 1.0 }]),
        with("vip-pls", ModelKind::Pls, vec![SelectionSpec::Vip { threshold: 1.0 }]),
        with(
            "spls",
            ModelKind::SparsePls,
            [5, 10, 20, 50].map(|keep_k| SelectionSpec::Sparse { keep_k }).to_vec(),
        ),
    ]
}

/// Reports of [`informative_specs`] on one informative dataset.
pub fn informative_reports(seed: u64, noise_sd: f64) -> Result<Vec<ValidationReport>> {
    let rng = RngStream::from_seed(seed).derive(&[TAG_INFORMATIVE]);
    let ds = gen_fig6(20, 100, 2, 10, noise_sd, &rng)?.dataset;
    informative_specs(seed).iter().map(|s| double_cv(&ds, s)).collect()
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// CV-curve plot data: the best criterion per component count over the
/// selection settings of an inner-loop curve.
pub fn inner_curve_plot(sel_curve: &[CurvePoint], orientation: Orientation) -> Result<PlotData> {
    let mut lvs: Vec<usize> = sel_curve.iter().map(|c| c.n_lv).collect();
    lvs.dedup();
    let metric = lvs
        .iter()
        .map(|&a| {
            sel_curve
                .iter()
                .filter(|c| c.n_lv == a)
                .filter_map(|c| c.metric)
                .reduce(|a, b| match orientation {
                    Orientation::HigherBetter => a.max(b),
                    Orientation::LowerBetter => a.min(b),
                })
                .unwrap_or(f64::NAN)
        })
        .collect();
    PlotData::new(
        PlotKind::CvCurve,
        vec![
            ("n_lv".into(), lvs.iter().map(|&a| a as f64).collect()),
            ("metric".into(), metric),
        ],
    )
}

/// Regenerates figure `id` (1 to 6): plot-data CSVs plus
/// `fig<id>_summary.json` in `out_dir`. Returns the summary. Figure 6 also
/// writes `fig6_timings.json`, which varies between runs.
pub fn reproduce_figure(id: u8, seed: u64, out_dir: &Path) -> Result<Value> {
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let seeds = seed..seed + SEEDS_PER_SUMMARY;
    let summary = match id {
        1 => {
            let mut out = serde_json::Map::new();
            for (label, frac) in [("minority_30", 0.30), ("minority_01", 0.01)] {
                let curves = roc_replicates(seed, frac)?;
                for (r, c) in curves.iter().enumerate() {
                    PlotData::new(
                        PlotKind::Roc,
                        vec![
                            ("fpr".into(), c.points.iter().map(|p| p.0).collect()),
                            ("tpr".into(), c.points.iter().map(|p| p.1).collect()),
                        ],
                    )?
                    .write_csv(&out_dir.join(format!("fig1_{label}_rep{:02}.csv", r + 1)))?;
                }
                let a: Vec<f64> = curves.iter().map(|c| c.auroc).collect();
                let spread = a.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - a.iter().copied().fold(f64::INFINITY, f64::min);
                out.insert(label.into(), json!({"minority_fraction": frac, "auroc": a, "spread": spread}));
            }
            Value::Object(out)
        }
        2 | 3 => {
            let costs: Vec<ThresholdCosts> = seeds.clone().map(threshold_costs).collect::<Result<_>>()?;
            let col = |f: fn(&ThresholdCosts) -> f64| costs.iter().map(f).collect::<Vec<f64>>();
            let (columns, keys): (Vec<(String, Vec<f64>)>, [&str; 3]) = if id == 2 {
                (
                    vec![
                        ("classifier".into(), col(|c| c.nmc_classifier)),
                        ("always_negative".into(), col(|c| c.nmc_naive)),
                    ],
                    ["classifier", "always_negative", ""],
                )
            } else {
                (
                    vec![
                        ("threshold_0.7".into(), col(|c| c.wmc_threshold_07)),
                        ("threshold_0.99".into(), col(|c| c.wmc_threshold_099)),
                        ("always_negative".into(), col(|c| c.wmc_naive)),
                    ],
                    ["threshold_0.7", "threshold_0.99", "always_negative"],
                )
            };
            let plot = PlotData::new(PlotKind::Boxplot, columns)?;
            plot.write_csv(&out_dir.join(format!("fig{id}_boxplot.csv")))?;
            let medians: serde_json::Map<String, Value> = keys
                .iter()
                .filter(|k| !k.is_empty())
                .map(|k| (k.to_string(), json!(crate::engine::quantile(plot.column(k).unwrap_or(&[]), 0.5))))
                .collect();
            json!({
                "criterion": if id == 2 { "nmc" } else { "wmc" },
                "seeds": [seed, seed + SEEDS_PER_SUMMARY - 1],
                "medians": medians,
                "positives": costs.iter().map(|c| c.positives).collect::<Vec<_>>(),
            })
        }
        4 => {
            let sel = null_cv_curve(seed)?;
            inner_curve_plot(&sel.curve, Orientation::LowerBetter)?.write_csv(&out_dir.join("fig4_cv_curve.csv"))?;
            let beats: Vec<bool> = seeds
                .clone()
                .map(|s| null_cv_curve(s).map(|c| curve_beats_baseline(&c, NULL_CURVE_MARGIN)))
                .collect::<Result<_>>()?;
            json!({
                "press_0_lv": sel.curve[0].metric,
                "chosen_n_lv": sel.chosen.n_lv,
                "curve": sel.curve.iter().map(|c| c.metric).collect::<Vec<_>>(),
                "fraction_of_seeds_beating_0_lv_by_5_percent":
                    beats.iter().filter(|&&b| b).count() as f64 / beats.len() as f64,
            })
        }
        5 => {
            let leaky = highdim_null_report(seed, true)?;
            let correct = highdim_null_report(seed, false)?;
            inner_curve_plot(&leaky.per_repetition[0].folds[0].inner_curve, Orientation::HigherBetter)?
                .write_csv(&out_dir.join("fig5a_cv_curve.csv"))?;
            inner_curve_plot(&correct.per_repetition[0].folds[0].inner_curve, Orientation::HigherBetter)?
                .write_csv(&out_dir.join("fig5b_cv_curve.csv"))?;
            json!({
                "q2_selection_before_split": leaky.summary.median,
                "q2_selection_in_inner_loop": correct.summary.median,
                "difference": leaky.summary.median - correct.summary.median,
                "watermark_before_split": leaky.watermark,
                "preselected_variables": leaky.preselected_variables.map(|v| v.len()),
            })
        }
        6 => {
            let reports = informative_reports(seed, FIG6_NOISE_SD)?;
            PlotData::new(
                PlotKind::Boxplot,
                reports.iter().map(|r| (r.pipeline.clone(), r.metrics())).collect(),
            )?
            .write_csv(&out_dir.join("fig6_boxplot.csv"))?;
            let cmp = compare_models(&reports[1], &reports[2])?;
            write_json(
                &out_dir.join("fig6_timings.json"),
                &json!(reports
                    .iter()
                    .map(|r| (r.pipeline.clone(), json!(r.wall_clock_seconds)))
                    .collect::<serde_json::Map<_, _>>()),
            )?;
            json!({
                "noise_sd": FIG6_NOISE_SD,
                "pipelines": reports.iter().map(|r| json!({
                    "name": r.pipeline,
                    "median_q2": r.summary.median,
                    "iqr_q2": r.summary.iqr,
                    "mean_q2": r.summary.mean,
                    "sd_q2": r.summary.sd,
                    "model_fits": r.model_fits,
                })).collect::<Vec<_>>(),
                "sr_vs_vip": cmp,
            })
        }
        other => return Err(Error::invalid(format!("figure id {other} is not in 1..=6"))),
    };
    write_json(&out_dir.join(format!("fig{id}_summary.json")), &summary)?;
    Ok(summary)
}
