use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::quantile;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Nonparametric bootstrap of a mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub mean: f64,
    /// Standard deviation of the bootstrap means.
    pub sd: f64,
    /// Percentile 95% interval of the bootstrap means.
    pub lower: f64,
    pub upper: f64,
    pub n_boot: usize,
}

pub fn bootstrap_metric(values: &[f64], n_boot: usize, rng: &RngStream) -> Result<BootstrapSummary> {
    if values.len() < 2 {
        return Err(Error::invalid("bootstrap needs at least two observations"));
    }
    if n_boot < 1 {
        return Err(Error::invalid("n_boot must be at least 1"));
    }
    let n = values.len();
    let mut g = rng.generator();
    let means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| values[g.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_boot as f64;
    let sd = if n_boot > 1 {
        (means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (n_boot - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BootstrapSummary {
        mean: values.iter().sum::<f64>() / n as f64,
        sd,
        lower: quantile(&means, 0.025),
        upper: quantile(&means, 0.975),
        n_boot,
    })
}
