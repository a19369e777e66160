//! Permutation nulls: rows of one block are shuffled and the whole
//! validation is rerun.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{double_cv, double_cv_leaky};
use super::PipelineSpec;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Orientation;
use crate::rng::RngStream;

const PERMUTATION: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullResult {
    pub observed: f64,
    pub null_distribution: Vec<f64>,
    /// `(1 + #null at least as good as observed) / (1 + n_perm)`.
    pub p_value: f64,
}

/// Copy of `ds` whose `block` rows are reordered so that new row `i` is old
/// row `perm[i]`; the other block and the row annotations stay put.
pub fn permute_rows(ds: &Dataset, block: Block, perm: &[usize]) -> Result<Dataset> {
    match block {
        Block::X => ds.replace_x(ds.x().gather_rows(perm)?),
        Block::Y => ds.replace_y(ds.require_y()?.gather_rows(perm)?),
    }
}

/// Add-one Monte-Carlo null for an arbitrary statistic of a row permutation.
///
/// Permutation `i` is drawn from `rng.derive([i])`, so the result does not
/// depend on evaluation order.
pub fn permutation_null_with<F>(
    observed: f64,
    n_rows: usize,
    n_perm: usize,
    orientation: Orientation,
    rng: &RngStream,
    statistic: F,
) -> Result<NullResult>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if n_perm == 0 {
        return Err(Error::invalid("n_perm must be at least 1"));
    }
    let null: Vec<f64> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut perm: Vec<usize> = (0..n_rows).collect();
            perm.shuffle(&mut rng.derive(&[i as u64]).generator());
            statistic(&perm)
        })
        .collect::<Result<_>>()?;
    let as_good = null
        .iter()
        .filter(|&&v| match orientation {
            Orientation::HigherBetter => v >= observed,
            Orientation::LowerBetter => v <= observed,
        })
        .count();
    Ok(NullResult {
        observed,
        p_value: (1 + as_good) as f64 / (1 + n_perm) as f64,
        null_distribution: null,
    })
}

/// Null distribution of the double-CV criterion with `block` permuted.
///
/// The observed value is the median over the spec's repetitions; each
/// permutation reruns the full validation with a single repetition and
/// the same seed. `leaky` reruns the watermarked leaky mode instead.
pub fn permutation_null(
    ds: &Dataset,
    spec: &PipelineSpec,
    n_perm: usize,
    block: Block,
    leaky: bool,
) -> Result<NullResult> {
    let run = |d: &Dataset, s: &PipelineSpec| {
        if leaky {
            double_cv_leaky(d, s, None)
        } else {
            double_cv(d, s)
        }
    };
    let observed = run(ds, spec)?.summary.median;
    let mut single = spec.clone();
    single.n_repetitions = 1;
    let rng = RngStream::from_seed(spec.seed).derive(&[PERMUTATION, block as u64]);
    permutation_null_with(
        observed,
        ds.n_rows(),
        n_perm,
        spec.metric.orientation(),
        &rng,
        |perm| Ok(run(&permute_rows(ds, block, perm)?, &single)?.per_repetition[0].metric),
    )
}
