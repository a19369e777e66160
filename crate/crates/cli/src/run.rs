//! Executes a run configuration and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use valguard::engine::{
    bootstrap_metric, compare_models, double_cv, double_cv_leaky, permutation_null,
    ComparisonResult, ValidationReport, LEAKAGE_WATERMARK, REPORT_SCHEMA_VERSION,
};
use valguard::figures::inner_curve_plot;
use valguard::plotdata::{PlotData, PlotKind};
use valguard::{load_dataset, Dataset, RngStream};

use crate::config::RunConfig;
use crate::error::{CliError, Context};

/// Stream tags below the run seed.
const TAG_SCENARIO: u64 = 0;
const TAG_BOOTSTRAP: u64 = 3;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// State of `--demonstrate-leakage`.
    pub demonstrate_leakage: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SkippedComparison {
    pub pipelines: [String; 2],
    pub reason: String,
}

/// Everything a run writes to its report JSON.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: u64,
    pub data_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub watermark: Option<String>,
    pub reports: Vec<ValidationReport>,
    pub comparisons: Vec<ComparisonResult>,
    pub skipped_comparisons: Vec<SkippedComparison>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub written: Vec<PathBuf>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core {
        context: "writing outputs".into(),
        source: valguard::Error::Io {
            path: path.to_path_buf(),
            source: e,
        },
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn load_data(cfg: &RunConfig, seed: u64, config_dir: &Path) -> Result<(Dataset, String), CliError> {
    if let Some(scenario) = &cfg.scenario {
        let ds = scenario
            .generate(&RngStream::from_seed(seed).derive(&[TAG_SCENARIO]))
            .context(|| "scenario".into())?;
        let name = serde_json::to_value(scenario)
            .ok()
            .and_then(|v| v.get("name").and_then(Value::as_str).map(str::to_owned))
            .unwrap_or_default();
        return Ok((ds, format!("scenario:{name}")));
    }
    let data = cfg.data.as_ref().ok_or_else(|| CliError::config("data: missing"))?;
    let path = config_dir.join(&data.path);
    let ds = load_dataset(&path, &data.y_cols, data.group_col.as_ref(), data.time_col.as_ref())
        .context(|| format!("data.path {}", data.path.display()))?;
    Ok((ds, data.path.display().to_string()))
}

/// Mean inner-loop curve over every outer fold of every repetition.
fn mean_curve(report: &ValidationReport) -> Result<PlotData, CliError> {
    let orientation = report.orientation;
    let mut lvs: Vec<f64> = Vec::new();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for fold in report.per_repetition.iter().flat_map(|r| &r.folds) {
        let plot = inner_curve_plot(&fold.inner_curve, orientation).context(|| report.pipeline.clone())?;
        let (Some(a), Some(m)) = (plot.column("n_lv"), plot.column("metric")) else {
            continue;
        };
        if lvs.is_empty() {
            lvs = a.to_vec();
            sums = vec![(0.0, 0); a.len()];
        }
        for (s, v) in sums.iter_mut().zip(m) {
            if v.is_finite() {
                s.0 += v;
                s.1 += 1;
            }
        }
    }
    let metric = sums
        .iter()
        .map(|&(s, c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    PlotData::new(
        PlotKind::CvCurve,
        vec![("n_lv".into(), lvs), ("metric".into(), metric)],
    )
    .context(|| report.pipeline.clone())
}

/// Validates every pipeline, compares each pair, and writes the artifacts.
pub fn run(cfg: &RunConfig, config_dir: &Path, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    if cfg.demonstrate_leakage != opts.demonstrate_leakage {
        return Err(CliError::config(
            "demonstrate_leakage: a leakage demonstration needs both the --demonstrate-leakage flag \
             and \"demonstrate_leakage\": true in the config",
        ));
    }
    let leaky = opts.demonstrate_leakage;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let (ds, data_source) = load_data(cfg, seed, config_dir)?;

    let mut reports = Vec::with_capacity(cfg.pipelines.len());
    for (i, spec) in cfg.pipelines.iter().enumerate() {
        let mut spec = spec.clone();
        spec.seed = seed;
        let ctx = || format!("pipelines[{i}] ({})", spec.name);
        let mut report = if leaky {
            double_cv_leaky(&ds, &spec, None)
        } else {
            double_cv(&ds, &spec)
        }
        .context(ctx)?;
        if cfg.permutation.enabled {
            let null = permutation_null(&ds, &spec, cfg.permutation.n_perm, cfg.permutation.block, leaky)
                .context(ctx)?;
            report.null_distribution = Some(null.null_distribution);
            report.p_value_vs_null = Some(null.p_value);
            report.permutation_block = Some(cfg.permutation.block);
        }
        if let Some(b) = &cfg.bootstrap {
            let rng = RngStream::from_seed(seed).derive(&[TAG_BOOTSTRAP, i as u64]);
            report.bootstrap = Some(bootstrap_metric(&report.metrics(), b.n_boot, &rng).context(ctx)?);
        }
        reports.push(report);
    }

    let mut comparisons = Vec::new();
    let mut skipped = Vec::new();
    for a in 0..reports.len() {
        for b in a + 1..reports.len() {
            match compare_models(&reports[a], &reports[b]) {
                Ok(c) => comparisons.push(c),
                Err(e) => skipped.push(SkippedComparison {
                    pipelines: [reports[a].pipeline.clone(), reports[b].pipeline.clone()],
                    reason: e.to_string(),
                }),
            }
        }
    }

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed,
        data_source,
        watermark: leaky.then(|| LEAKAGE_WATERMARK.to_string()),
        reports,
        comparisons,
        skipped_comparisons: skipped,
    };
    let written = write_outputs(cfg, &report, &opts.out_dir)?;
    Ok(RunOutcome {
        report_path: opts.out_dir.join(&cfg.outputs.report_path),
        report,
        written,
    })
}

fn write_outputs(cfg: &RunConfig, report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let report_path = out_dir.join(&cfg.outputs.report_path);
    let curves = out_dir.join(&cfg.outputs.curves_dir);
    let report_dir = report_path.parent().unwrap_or(out_dir).to_path_buf();
    for dir in [&report_dir, &curves] {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut written = Vec::new();
    write_json(&report_path, report)?;
    written.push(report_path);

    // Wall-clock times vary between runs, so they live outside the report.
    let timings: serde_json::Map<String, Value> = report
        .reports
        .iter()
        .map(|r| {
            (
                r.pipeline.clone(),
                json!({
                    "total_seconds": r.wall_clock_seconds,
                    "per_repetition_seconds":
                        r.per_repetition.iter().map(|p| p.wall_clock_seconds).collect::<Vec<_>>(),
                }),
            )
        })
        .collect();
    let timings_path = report_dir.join("timings.json");
    write_json(&timings_path, &timings)?;
    written.push(timings_path);

    let save = |plot: PlotData, name: String, written: &mut Vec<PathBuf>| -> Result<(), CliError> {
        let path = curves.join(name);
        plot.write_csv(&path).context(|| "writing plot data".into())?;
        written.push(path);
        Ok(())
    };
    for r in &report.reports {
        save(mean_curve(r)?, format!("{}_cv_curve.csv", r.pipeline), &mut written)?;
        if let Some(null) = &r.null_distribution {
            let plot = PlotData::new(PlotKind::NullHistogram, vec![("null".into(), null.clone())])
                .context(|| r.pipeline.clone())?;
            save(plot, format!("{}_null_histogram.csv", r.pipeline), &mut written)?;
        }
    }
    let same_length = report
        .reports
        .windows(2)
        .all(|w| w[0].per_repetition.len() == w[1].per_repetition.len());
    if same_length {
        let plot = PlotData::new(
            PlotKind::Boxplot,
            report.reports.iter().map(|r| (r.pipeline.clone(), r.metrics())).collect(),
        )
        .context(|| "boxplot".into())?;
        save(plot, "boxplot.csv".into(), &mut written)?;
    } else {
        for r in &report.reports {
            let plot = PlotData::new(PlotKind::Boxplot, vec![(r.pipeline.clone(), r.metrics())])
                .context(|| r.pipeline.clone())?;
            save(plot, format!("{}_boxplot.csv", r.pipeline), &mut written)?;
        }
    }
    Ok(written)
}
