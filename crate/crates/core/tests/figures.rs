use std::fs;
use std::path::Path;

use valguard::figures::reproduce_figure;
use valguard::Error;

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn figure_one_writes_ten_curves_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let s = reproduce_figure(1, 7, dir.path()).unwrap();
    let names = files(dir.path());
    assert_eq!(names.iter().filter(|n| n.starts_with("fig1_minority_30_rep")).count(), 10);
    assert_eq!(names.iter().filter(|n| n.starts_with("fig1_minority_01_rep")).count(), 10);
    assert!(names.contains(&"fig1_summary.json".to_string()));
    assert_eq!(s["minority_30"]["auroc"].as_array().unwrap().len(), 10);
    let csv = fs::read_to_string(dir.path().join("fig1_minority_30_rep01.csv")).unwrap();
    assert!(csv.starts_with("fpr,tpr\n0,0\n"));
}

#[test]
fn cost_figures_summarise_medians() {
    let dir = tempfile::tempdir().unwrap();
    let s2 = reproduce_figure(2, 0, dir.path()).unwrap();
    let s3 = reproduce_figure(3, 0, dir.path()).unwrap();
    assert!(s2["medians"]["classifier"].as_f64().unwrap() > s2["medians"]["always_negative"].as_f64().unwrap());
    let m = &s3["medians"];
    assert!(m["threshold_0.7"].as_f64() < m["threshold_0.99"].as_f64());
    let csv = fs::read_to_string(dir.path().join("fig3_boxplot.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for id in [4, 5] {
        reproduce_figure(id, 11, a.path()).unwrap();
        reproduce_figure(id, 11, b.path()).unwrap();
    }
    let names = files(a.path());
    assert_eq!(names, files(b.path()));
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n}");
    }
}

#[test]
fn leakage_figure_contrasts_the_two_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let s = reproduce_figure(5, 0, dir.path()).unwrap();
    assert!(s["difference"].as_f64().unwrap() > 0.3, "{s}");
    assert_eq!(s["watermark_before_split"], "INVALID — leakage demonstration");
    assert!(dir.path().join("fig5a_cv_curve.csv").exists());
    assert!(dir.path().join("fig5b_cv_curve.csv").exists());
}

#[test]
fn comparison_figure_lists_four_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let s = reproduce_figure(6, 0, dir.path()).unwrap();
    assert_eq!(s["pipelines"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("fig6_boxplot.csv")).unwrap();
    assert!(csv.starts_with("pls,sr-pls,vip-pls,spls\n"));
    assert_eq!(csv.lines().count(), 11);
    assert!(dir.path().join("fig6_timings.json").exists());
}

#[test]
fn unknown_figure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(reproduce_figure(7, 0, dir.path()), Err(Error::InvalidArgument(_))));
}
