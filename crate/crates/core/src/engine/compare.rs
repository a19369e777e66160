//! Paired comparison of two pipelines validated on identical splits.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::report::{quantile, ValidationReport};
use crate::error::{Error, Result};
use crate::metrics::MetricName;

/// Largest count of nonzero differences handled by exact enumeration.
const EXACT_MAX: usize = 20;

pub const COMPARISON_DISCLOSURE: &str = "repeated double-CV estimates share data and are not \
independent; the paired test is reported without variance correction";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub model_names: (String, String),
    pub metric: MetricName,
    /// First minus second, one per repetition.
    pub per_repetition_diffs: Vec<f64>,
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    pub medians: (f64, f64),
    pub iqrs: (f64, f64),
    pub model_fits: (usize, usize),
    /// Wall-clock totals; left out of the JSON to keep it reproducible.
    #[serde(skip)]
    pub timings_seconds: (f64, f64),
    pub disclosure: String,
}

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped and
/// tied magnitudes get midranks. Returns `(W+, p, exact)`.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> (f64, f64, bool) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let m = nz.len();
    if m == 0 {
        return (0.0, 1.0, true);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| nz[a].abs().total_cmp(&nz[b].abs()));
    // Doubled midranks stay integral.
    let mut rank2 = vec![0usize; m];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && nz[order[j + 1]].abs() == nz[order[i]].abs() {
            j += 1;
        }
        for &o in &order[i..=j] {
            rank2[o] = i + j + 2;
        }
        ties.push((j - i + 1) as f64);
        i = j + 1;
    }
    let w2: usize = (0..m).filter(|&k| nz[k] > 0.0).map(|k| rank2[k]).sum();
    let w = w2 as f64 / 2.0;
    if m <= EXACT_MAX {
        let total: usize = rank2.iter().sum();
        let mut ways = vec![0.0f64; total + 1];
        ways[0] = 1.0;
        for &r in &rank2 {
            for s in (r..=total).rev() {
                ways[s] += ways[s - r];
            }
        }
        let all = 2f64.powi(m as i32);
        let lower: f64 = ways[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = ways[w2..].iter().sum::<f64>() / all;
        return (w, (2.0 * lower.min(upper)).min(1.0), true);
    }
    let mf = m as f64;
    let mean = mf * (mf + 1.0) / 4.0;
    let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0
        - ties.iter().map(|t| t * t * t - t).sum::<f64>() / 48.0;
    if !(var > 0.0) {
        return (w, 1.0, false);
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    // Two-sided normal tail: 2(1 - Φ(z)) = erfc(z/√2).
    (w, erfc(z / std::f64::consts::SQRT_2).min(1.0), false)
}

/// Paired two-sided signed-rank comparison of per-repetition criteria.
///
/// Both reports must share the repetition count, metric, seed and every
/// outer split plan.
pub fn compare_models(a: &ValidationReport, b: &ValidationReport) -> Result<ComparisonResult> {
    let unpaired = |why: &str| {
        Err(Error::invalid(format!(
            "reports {} and {} are unpaired: {why}",
            a.pipeline, b.pipeline
        )))
    };
    if a.n_repetitions != b.n_repetitions || a.per_repetition.len() != b.per_repetition.len() {
        return unpaired("repetition counts differ");
    }
    if a.metric != b.metric {
        return unpaired("metrics differ");
    }
    if a.seed != b.seed {
        return unpaired("seeds differ");
    }
    if a
        .per_repetition
        .iter()
        .zip(&b.per_repetition)
        .any(|(ra, rb)| ra.outer_plan != rb.outer_plan)
    {
        return unpaired("outer split plans differ");
    }
    let (va, vb) = (a.metrics(), b.metrics());
    let diffs: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x - y).collect();
    let (statistic, p_value, exact) = wilcoxon_signed_rank(&diffs);
    let iqr = |v: &[f64]| quantile(v, 0.75) - quantile(v, 0.25);
    Ok(ComparisonResult {
        model_names: (a.pipeline.clone(), b.pipeline.clone()),
        metric: a.metric.name,
        per_repetition_diffs: diffs,
        statistic,
        p_value,
        exact,
        medians: (quantile(&va, 0.5), quantile(&vb, 0.5)),
        iqrs: (iqr(&va), iqr(&vb)),
        model_fits: (a.model_fits, b.model_fits),
        timings_seconds: (a.wall_clock_seconds, b.wall_clock_seconds),
        disclosure: COMPARISON_DISCLOSURE.to_string(),
    })
}
