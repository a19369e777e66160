//! Seeded generators for the simulated experiments and for null examples.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::Dataset;
use crate::engine::{permute_rows, PermutedBlock};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{standard_normal_matrix, RngStream};

/// Separation of the class-conditional latent scores; `Φ(d′/√2) ≈ 0.85`.
pub const DEFAULT_DISCRIMINABILITY: f64 = 1.466;

/// Noise level of the informative-block generator, picked from
/// {0.5, 1, 2, 4} as the one whose dense-PLS median Q² is closest to 0.7.
pub const FIG6_NOISE_SD: f64 = 0.5;

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Labels (1 = minority, 0 = majority) and classifier scores in (0, 1).
///
/// Latent scores are N(0,1) for negatives and N(d′,1) for positives; the
/// emitted score is the latent value passed through the standard normal
/// distribution function.
pub fn gen_classifier_scores(
    n: usize,
    minority_fraction: f64,
    discriminability: f64,
    rng: &RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(minority_fraction > 0.0 && minority_fraction < 0.5) {
        return Err(Error::invalid(format!(
            "minority_fraction {minority_fraction} outside (0, 0.5)"
        )));
    }
    if (n as f64) * minority_fraction < 1.0 {
        return Err(Error::invalid(format!(
            "{n} rows at minority fraction {minority_fraction} give under one expected positive"
        )));
    }
    if !discriminability.is_finite() {
        return Err(Error::invalid("discriminability must be finite"));
    }
    let mut g = rng.generator();
    let mut labels = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let positive = g.random_bool(minority_fraction);
        let z: f64 = StandardNormal.sample(&mut g);
        let s = if positive { z + discriminability } else { z };
        labels.push(f64::from(u8::from(positive)));
        scores.push(normal_cdf(s));
    }
    Ok((labels, scores))
}

/// X and y drawn independently from standard normals.
pub fn gen_null(n: usize, p: usize, rng: &RngStream) -> Result<Dataset> {
    let x = standard_normal_matrix(&rng.derive(&[0]), n, p)?;
    let y = standard_normal_matrix(&rng.derive(&[1]), n, 1)?;
    Dataset::new(x).with_y(y)
}

/// Null PLS example, X 20×10 and y 20×1.
pub fn gen_fig4(rng: &RngStream) -> Result<Dataset> {
    gen_null(20, 10, rng)
}

/// High-dimensional null example, X 20×1000 and y 20×1.
pub fn gen_fig5(rng: &RngStream) -> Result<Dataset> {
    gen_null(20, 1000, rng)
}

/// Dataset whose response depends on a known subset of variables.
#[derive(Clone, Debug)]
pub struct InformativeData {
    pub dataset: Dataset,
    /// Sorted ground-truth informative columns.
    pub informative: Vec<usize>,
}

/// `Y = X_I·B + ε` with `B` and `X` standard normal and `ε ~ N(0, noise_sd²)`;
/// the informative columns `I` are a random subset of size `n_informative`.
pub fn gen_fig6(
    n: usize,
    p: usize,
    y_cols: usize,
    n_informative: usize,
    noise_sd: f64,
    rng: &RngStream,
) -> Result<InformativeData> {
    if n_informative == 0 || n_informative > p {
        return Err(Error::invalid(format!("n_informative {n_informative} outside 1..={p}")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid("noise_sd must be finite and non-negative"));
    }
    let x = standard_normal_matrix(&rng.derive(&[0]), n, p)?;
    let b = standard_normal_matrix(&rng.derive(&[1]), n_informative, y_cols)?;
    let eps = standard_normal_matrix(&rng.derive(&[2]), n, y_cols)?;
    let mut cols: Vec<usize> = (0..p).collect();
    cols.shuffle(&mut rng.derive(&[3]).generator());
    let mut informative = cols[..n_informative].to_vec();
    informative.sort_unstable();
    let signal = x.select_columns(&informative)?.matmul(&b)?;
    let values = signal
        .values()
        .iter()
        .zip(eps.values())
        .map(|(s, e)| s + noise_sd * e)
        .collect();
    let y = Matrix::new(n, y_cols, values)?;
    Ok(InformativeData {
        dataset: Dataset::new(x).with_y(y)?,
        informative,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullMode {
    /// Shuffle Y rows; X and both marginals are untouched.
    PermuteY,
    /// Replace X by normals matching each column's mean and sd.
    SynthGaussian,
}

/// A dataset shaped like `ds` whose X carries no information on Y.
pub fn make_null_example(ds: &Dataset, mode: NullMode, rng: &RngStream) -> Result<Dataset> {
    match mode {
        NullMode::PermuteY => {
            ds.require_y()?;
            let mut perm: Vec<usize> = (0..ds.n_rows()).collect();
            perm.shuffle(&mut rng.generator());
            permute_rows(ds, PermutedBlock::Y, &perm)
        }
        NullMode::SynthGaussian => {
            let (n, p) = ds.x().shape();
            let means = ds.x().column_means();
            let sds = if n > 1 { ds.x().column_sds() } else { vec![0.0; p] };
            let mut g = rng.generator();
            let mut x = Matrix::zeros(n, p);
            for j in 0..p {
                let d = Normal::new(means[j], sds[j]).map_err(|e| Error::invalid(e.to_string()))?;
                for i in 0..n {
                    x.set(i, j, d.sample(&mut g));
                }
            }
            ds.replace_x(x)
        }
    }
}

/// A named scenario with its parameters, as written in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// Classifier scores (X, one column) against labels (Y).
    Fig1Roc {
        #[serde(default = "thousand")]
        n: usize,
        #[serde(default = "thirty_percent")]
        minority_fraction: f64,
        #[serde(default = "default_discriminability")]
        discriminability: f64,
    },
    Fig23NmcWmc {
        #[serde(default = "thousand")]
        n: usize,
        #[serde(default = "one_percent")]
        minority_fraction: f64,
        #[serde(default = "default_discriminability")]
        discriminability: f64,
    },
    Fig4PlsNull {
        #[serde(default = "twenty")]
        n: usize,
        #[serde(default = "ten")]
        p: usize,
    },
    Fig5HighdimNull {
        #[serde(default = "twenty")]
        n: usize,
        #[serde(default = "thousand")]
        p: usize,
    },
    Fig6Informative {
        #[serde(default = "twenty")]
        n: usize,
        #[serde(default = "hundred")]
        p: usize,
        #[serde(default = "two")]
        y_cols: usize,
        #[serde(default = "ten")]
        n_informative: usize,
        #[serde(default = "fig6_noise")]
        noise_sd: f64,
    },
}

fn thousand() -> usize {
    1000
}
fn hundred() -> usize {
    100
}
fn twenty() -> usize {
    20
}
fn ten() -> usize {
    10
}
fn two() -> usize {
    2
}
fn thirty_percent() -> f64 {
    0.3
}
fn one_percent() -> f64 {
    0.01
}
fn default_discriminability() -> f64 {
    DEFAULT_DISCRIMINABILITY
}
fn fig6_noise() -> f64 {
    FIG6_NOISE_SD
}

impl ScenarioSpec {
    pub fn generate(&self, rng: &RngStream) -> Result<Dataset> {
        match *self {
            ScenarioSpec::Fig1Roc { n, minority_fraction, discriminability }
            | ScenarioSpec::Fig23NmcWmc { n, minority_fraction, discriminability } => {
                let (labels, scores) =
                    gen_classifier_scores(n, minority_fraction, discriminability, rng)?;
                Dataset::new(Matrix::column_vector(scores)?).with_y(Matrix::column_vector(labels)?)
            }
            ScenarioSpec::Fig4PlsNull { n, p } | ScenarioSpec::Fig5HighdimNull { n, p } => {
                gen_null(n, p, rng)
            }
            ScenarioSpec::Fig6Informative { n, p, y_cols, n_informative, noise_sd } => {
                Ok(gen_fig6(n, p, y_cols, n_informative, noise_sd, rng)?.dataset)
            }
        }
    }
}
