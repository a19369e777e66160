//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! runtime and exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde_json::json;
use valguard::engine::{
    compare_models, double_cv_leaky, double_cv_with, firewall_violations, permutation_null_with,
    permute_rows, ModelKind, PermutedBlock, PipelineSpec, RecordingProbe, ValidationReport,
};
use valguard::figures::{
    curve_beats_baseline, highdim_null_report, informative_reports, null_cv_curve,
    reproduce_figure, roc_replicates, threshold_costs, SEEDS_PER_SUMMARY,
};
use valguard::metrics::{roc_curve, MetricName, MetricSpec, Orientation};
use valguard::pls::{fit_pls, fit_pls_preprocessed, fit_sparse_pls, vip_scores, SelectionSpec};
use valguard::preproc::{apply_preproc, fit_preproc, PreprocSpec};
use valguard::rng::standard_normal_matrix;
use valguard::simgen::FIG6_NOISE_SD;
use valguard::split::{SplitKind, SplitPolicy};
use valguard::{Dataset, Matrix, RngStream};

// Pinned bands and budgets.
const ROC_BAND: (f64, f64) = (0.80, 0.90);
const ROC_SPREAD_RATIO: f64 = 2.0;
const NULL_CURVE_IMPROVEMENT: f64 = 0.05;
const NULL_CURVE_MIN_FRACTION: f64 = 0.80;
const LEAKY_Q2_MIN: f64 = 0.5;
const IN_LOOP_Q2_MAX: f64 = 0.05;
const COMPARISON_P_MIN: f64 = 0.01;
const COMPARISON_MIN_FRACTION: f64 = 0.70;
const META_SEEDS: u64 = 10;
const AUROC_TOL: f64 = 1e-12;
const LS_TOL: f64 = 1e-8;
const VIP_TOL: f64 = 1e-10;
const PERMUTATION_TOL: f64 = 0.02;

struct Outcome {
    pass: bool,
    detail: String,
}

fn median(v: &[f64]) -> f64 {
    valguard::engine::quantile(v, 0.5)
}

fn spread(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn roc_instability() -> Outcome {
    let a30: Vec<f64> = roc_replicates(0, 0.30).unwrap().iter().map(|c| c.auroc).collect();
    let a01: Vec<f64> = roc_replicates(0, 0.01).unwrap().iter().map(|c| c.auroc).collect();
    let (s30, s01) = (spread(&a30), spread(&a01));
    let in_band = a30.iter().all(|a| (ROC_BAND.0..=ROC_BAND.1).contains(a));
    Outcome {
        pass: s01 >= ROC_SPREAD_RATIO * s30 && in_band,
        detail: format!(
            "spread at 1% = {s01:.4}, at 30% = {s30:.4} (ratio {:.2}); 30% AUROCs in [{:.4}, {:.4}]",
            s01 / s30,
            a30.iter().copied().fold(f64::INFINITY, f64::min),
            a30.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
    }
}

fn nmc_versus_naive() -> Outcome {
    let costs: Vec<_> = (0..SEEDS_PER_SUMMARY).map(|s| threshold_costs(s).unwrap()).collect();
    let clf: Vec<f64> = costs.iter().map(|c| c.nmc_classifier).collect();
    let naive: Vec<f64> = costs.iter().map(|c| c.nmc_naive).collect();
    let naive_is_count = costs.iter().all(|c| c.nmc_naive == c.positives as f64);
    Outcome {
        pass: median(&clf) > median(&naive) && naive_is_count,
        detail: format!(
            "median NMC classifier {:.1} vs always-negative {:.1}; naive equals positive count: {naive_is_count}",
            median(&clf),
            median(&naive)
        ),
    }
}

fn wmc_ordering() -> Outcome {
    let costs: Vec<_> = (0..SEEDS_PER_SUMMARY).map(|s| threshold_costs(s).unwrap()).collect();
    let m = |f: fn(&valguard::figures::ThresholdCosts) -> f64| median(&costs.iter().map(f).collect::<Vec<_>>());
    let (t07, t099, naive) = (m(|c| c.wmc_threshold_07), m(|c| c.wmc_threshold_099), m(|c| c.wmc_naive));
    Outcome {
        pass: t07 < t099 && t099 < naive,
        detail: format!("median WMC: threshold 0.7 = {t07:.1}, 0.99 = {t099:.1}, always-negative = {naive:.1}"),
    }
}

fn null_curve() -> Outcome {
    let flat = (0..SEEDS_PER_SUMMARY)
        .filter(|&s| !curve_beats_baseline(&null_cv_curve(s).unwrap(), NULL_CURVE_IMPROVEMENT))
        .count();
    let frac = flat as f64 / SEEDS_PER_SUMMARY as f64;
    Outcome {
        pass: frac >= NULL_CURVE_MIN_FRACTION,
        detail: format!("{flat}/{SEEDS_PER_SUMMARY} seeds with no component beating the 0-LV PRESS by >5%"),
    }
}

fn leakage_contrast() -> Outcome {
    let q2 = |leaky: bool| -> Vec<f64> {
        (0..SEEDS_PER_SUMMARY)
            .map(|s| highdim_null_report(s, leaky).unwrap().summary.median)
            .collect()
    };
    let (leaky, in_loop) = (median(&q2(true)), median(&q2(false)));
    Outcome {
        pass: leaky >= LEAKY_Q2_MIN && in_loop <= IN_LOOP_Q2_MAX,
        detail: format!("median Q2 with selection before splitting {leaky:.3}, inside the inner loop {in_loop:.3}"),
    }
}

fn selection_comparison() -> Outcome {
    let mut iqr = vec![Vec::new(); 4];
    let mut seconds = [0.0; 4];
    let mut calm = 0;
    let mut names = Vec::new();
    for seed in 0..META_SEEDS {
        let r = informative_reports(seed, FIG6_NOISE_SD).unwrap();
        names = r.iter().map(|x| x.pipeline.clone()).collect();
        for i in 0..4 {
            iqr[i].push(r[i].summary.iqr);
            seconds[i] += r[i].wall_clock_seconds;
        }
        if compare_models(&r[1], &r[2]).unwrap().p_value > COMPARISON_P_MIN {
            calm += 1;
        }
    }
    // Order: pls, sr-pls, vip-pls, spls. IQRs are medians over meta-seeds.
    let m: Vec<f64> = iqr.iter().map(|v| median(v)).collect();
    let iqr_ok = [m[1], m[2]].iter().all(|&s| s <= m[0] && s <= m[3]);
    let p_ok = calm as f64 / META_SEEDS as f64 >= COMPARISON_MIN_FRACTION;
    let fastest = seconds.iter().copied().fold(f64::INFINITY, f64::min) == seconds[0];
    let list = |v: &[f64], d: usize| {
        names.iter().zip(v).map(|(n, x)| format!("{n} {x:.d$}")).collect::<Vec<_>>().join(", ")
    };
    Outcome {
        pass: iqr_ok && p_ok && fastest,
        detail: format!(
            "median IQR [{}] -> {}; SR vs VIP p > {COMPARISON_P_MIN} in {calm}/{META_SEEDS} -> {}; seconds [{}] -> {}",
            list(&m, 3),
            if iqr_ok { "ok" } else { "FAIL" },
            if p_ok { "ok" } else { "FAIL" },
            list(&seconds, 2),
            if fastest { "ok" } else { "FAIL" },
        ),
    }
}

fn oracles() -> Outcome {
    let mut failures = Vec::new();

    // AUROC against the pairwise count.
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let r = RngStream::from_seed(i);
        let n = 5 + (i as usize % 40);
        let s = standard_normal_matrix(&r.derive(&[0]), n, 1).unwrap();
        // Coarse scores so ties occur.
        let scores: Vec<f64> = s.column(0).iter().map(|v| (v * 2.0).round()).collect();
        let mut labels: Vec<f64> = standard_normal_matrix(&r.derive(&[1]), n, 1)
            .unwrap()
            .column(0)
            .iter()
            .map(|v| f64::from(u8::from(*v > 0.3)))
            .collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        let (mut pairs, mut wins) = (0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                if labels[a] == 1.0 && labels[b] == 0.0 {
                    pairs += 1.0;
                    wins += if scores[a] > scores[b] { 1.0 } else if scores[a] == scores[b] { 0.5 } else { 0.0 };
                }
            }
        }
        worst = worst.max((roc_curve(&scores, &labels, 1.0).unwrap().auroc - wins / pairs).abs());
    }
    if worst > AUROC_TOL {
        failures.push(format!("AUROC off by {worst:e}"));
    }

    // Full-rank PLS against least squares, plus VIP normalisation and
    // sparse PLS with every variable kept.
    let (mut ls_worst, mut vip_worst, mut sparse_equal): (f64, f64, bool) = (0.0, 0.0, true);
    for seed in 0..10 {
        let r = RngStream::from_seed(100 + seed);
        let (n, p) = (14, 6);
        let x = standard_normal_matrix(&r.derive(&[0]), n, p).unwrap();
        let y = standard_normal_matrix(&r.derive(&[1]), n, 1).unwrap();
        let m = fit_pls_preprocessed(&x, &y, &PreprocSpec::MeanCenter, &PreprocSpec::MeanCenter, p, None).unwrap();
        let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
        let b = DVector::from_fn(n, |i, _| y.get(i, 0));
        let fitted = &a * a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
        let pred = m.predict(&x).unwrap();
        for i in 0..n {
            ls_worst = ls_worst.max((pred.get(i, 0) - fitted[i]).abs());
        }
        let centre = |m: &Matrix| apply_preproc(&fit_preproc(&PreprocSpec::MeanCenter, m).unwrap(), m).unwrap();
        let (xc, yc) = (centre(&x), centre(&y));
        for lv in 1..=3 {
            let dense = fit_pls(&xc, &yc, lv).unwrap();
            let sum: f64 = vip_scores(&dense).unwrap().iter().map(|v| v * v).sum();
            vip_worst = vip_worst.max((sum - p as f64).abs());
            sparse_equal &= fit_sparse_pls(&xc, &yc, lv, p).unwrap() == dense;
        }
    }
    if ls_worst > LS_TOL {
        failures.push(format!("PLS vs least squares off by {ls_worst:e}"));
    }
    if vip_worst > VIP_TOL {
        failures.push(format!("sum of VIP^2 off by {vip_worst:e}"));
    }
    if !sparse_equal {
        failures.push("sparse PLS with keep_k = p differs from dense".into());
    }

    // Permutation p-value on three rows against full enumeration.
    let ds = Dataset::new(Matrix::column_vector(vec![1.0, 2.0, 3.0]).unwrap())
        .with_y(Matrix::column_vector(vec![2.0, 1.0, 3.0]).unwrap())
        .unwrap();
    let stat = |perm: &[usize]| {
        let d = permute_rows(&ds, PermutedBlock::Y, perm)?;
        let y = d.require_y()?;
        Ok((0..3).map(|i| d.x().get(i, 0) * y.get(i, 0)).sum::<f64>())
    };
    let observed = stat(&[0, 1, 2]).unwrap();
    let all = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let exact = all.iter().filter(|p| stat(&p[..]).unwrap() >= observed).count() as f64 / 6.0;
    let mc = permutation_null_with(observed, 3, 6 * 2000, Orientation::HigherBetter, &RngStream::from_seed(9), stat)
        .unwrap()
        .p_value;
    if (mc - exact).abs() > PERMUTATION_TOL {
        failures.push(format!("permutation p {mc:.4} vs exhaustive {exact:.4}"));
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!(
                "AUROC {worst:.1e}, LS {ls_worst:.1e}, VIP {vip_worst:.1e}, sparse == dense, permutation p {mc:.4} vs {exact:.4}"
            )
        } else {
            failures.join("; ")
        },
    }
}

fn firewall() -> Outcome {
    let n = 24;
    let r = RngStream::from_seed(77);
    let x = standard_normal_matrix(&r.derive(&[0]), n, 8).unwrap();
    let y = standard_normal_matrix(&r.derive(&[1]), n, 1).unwrap();
    let ds = Dataset::new(x.clone())
        .with_y(y)
        .unwrap()
        .with_groups((0..n).map(|i| format!("g{}", i / 3)).collect())
        .unwrap()
        .with_timestamps((0..n).map(|i| i as f64).collect())
        .unwrap();
    let labels: Vec<f64> = (0..n).map(|i| (i % 3) as f64).collect();
    let ds_class = Dataset::new(x).with_y(Matrix::column_vector(labels).unwrap()).unwrap();

    let base = |model: ModelKind, grid: Vec<SelectionSpec>, outer: SplitPolicy, metric: MetricName| {
        let mut s = PipelineSpec::regression("audit", vec![0, 1, 2], MetricSpec::new(metric), outer, SplitPolicy::random(3));
        s.model = model;
        s.selection_grid = grid;
        s.n_repetitions = 2;
        s.x_preproc = PreprocSpec::Autoscale;
        s
    };
    let filters = vec![SelectionSpec::None, SelectionSpec::Vip { threshold: 1.0 }, SelectionSpec::Sr { threshold: 0.5 }];
    let sparse = vec![SelectionSpec::Sparse { keep_k: 3 }, SelectionSpec::Sparse { keep_k: 8 }];
    let time = SplitPolicy { gap: 1, ..SplitPolicy::auto(SplitKind::TimeBlocked).with_folds(4) };
    let grouped = SplitPolicy { kind: SplitKind::Grouped, ..SplitPolicy::random(4) };
    let stratified = SplitPolicy { kind: SplitKind::Stratified, ..SplitPolicy::random(4) };
    let cases: Vec<(&str, &Dataset, PipelineSpec)> = vec![
        ("pls/random", &ds, base(ModelKind::Pls, filters.clone(), SplitPolicy::random(4), MetricName::Q2)),
        ("pls/grouped", &ds, base(ModelKind::Pls, filters.clone(), grouped.clone(), MetricName::Press)),
        ("pls/time", &ds, base(ModelKind::Pls, filters.clone(), time, MetricName::Mse)),
        ("spls/grouped", &ds, base(ModelKind::SparsePls, sparse.clone(), grouped, MetricName::Q2)),
        ("plsda/stratified", &ds_class, base(ModelKind::Plsda, filters.clone(), stratified.clone(), MetricName::Nmc)),
        ("splsda/stratified", &ds_class, base(ModelKind::SparsePlsda, sparse, stratified, MetricName::Auroc)),
    ];
    let mut clean = Vec::new();
    let mut dirty = Vec::new();
    for (name, data, spec) in &cases {
        let probe = RecordingProbe::new();
        let report: ValidationReport = double_cv_with(data, spec, Some(&probe)).unwrap();
        let events = probe.events();
        let v = firewall_violations(&events, &report);
        if v > 0 || events.is_empty() {
            dirty.push(format!("{name}: {v} violations"));
        } else {
            clean.push(*name);
        }
    }
    // The leaky path must be both caught by the audit and watermarked.
    let probe = RecordingProbe::new();
    let leaky = double_cv_leaky(&ds, &cases[0].2, Some(&probe)).unwrap();
    let caught = firewall_violations(&probe.events(), &leaky) > 0 && leaky.watermark.is_some();
    Outcome {
        pass: dirty.is_empty() && caught,
        detail: format!(
            "clean: {} of {} paths [{}]{}; leaky mode flagged and watermarked: {caught}",
            clean.len(),
            cases.len(),
            clean.join(", "),
            if dirty.is_empty() { String::new() } else { format!("; violations: {}", dirty.join(", ")) },
        ),
    }
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                // Wall-clock sidecars are excluded by design.
                if !name.ends_with("timings.json") {
                    out.push((name, fs::read(&p).unwrap()));
                }
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = json!({
        "schema_version": 1,
        "seed": 2024,
        "scenario": {"name": "fig6_informative"},
        "pipelines": [
            {"name": "pls", "model": "pls", "n_lv_grid": [0, 1, 2, 3],
             "outer_policy": {"kind": "random", "n_folds": 5}, "inner_policy": {"kind": "random", "n_folds": 4},
             "metric": {"name": "q2"}, "n_repetitions": 4},
            {"name": "sr-pls", "model": "pls", "n_lv_grid": [0, 1, 2, 3], "selection_grid": [{"method": "sr"}],
             "outer_policy": {"kind": "random", "n_folds": 5}, "inner_policy": {"kind": "random", "n_folds": 4},
             "metric": {"name": "q2"}, "n_repetitions": 4}
        ],
        "permutation": {"enabled": true, "n_perm": 9},
        "bootstrap": {"n_boot": 500}
    });
    let cfg = root.path().join("config.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let mut runs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = root.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_valguard"))
            .args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "31"])
            .args(["--threads", threads])
            .stdout(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        for id in 1..=6 {
            reproduce_figure(id, 31, &out.join("figures")).unwrap();
        }
        runs.push(artifacts(&out));
    }
    let differing: Vec<&str> = runs[0]
        .iter()
        .zip(&runs[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    let same = runs[0].len() == runs[1].len() && differing.is_empty();
    Outcome {
        pass: same && runs[0].len() > 20,
        detail: format!(
            "{} report/CSV/summary files compared across two runs (1 and 4 threads); differing: {:?}",
            runs[0].len(),
            differing
        ),
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("ROC instability under class imbalance", Duration::from_secs(5), roc_instability),
        ("misclassification count versus the naive rule", Duration::from_secs(5), nmc_versus_naive),
        ("weighted misclassification cost ordering", Duration::from_secs(5), wmc_ordering),
        ("flat CV curve on null data", Duration::from_secs(30), null_curve),
        ("leakage contrast on high-dimensional null data", Duration::from_secs(600), leakage_contrast),
        ("selection method comparison", Duration::from_secs(900), selection_comparison),
        ("oracle equivalences", Duration::from_secs(60), oracles),
        ("leakage firewall instrumentation", Duration::from_secs(60), firewall),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let pass = outcome.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} ({:.2} s, budget {} s): {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs(),
            outcome.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
