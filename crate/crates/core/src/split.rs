//! Fold assignment under an independence policy.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Random,
    Stratified,
    Grouped,
    TimeBlocked,
}

/// Whether a policy drives the outer (test) or inner (validation) loop;
/// only matters for the automatic fold count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopRole {
    Outer,
    Inner,
}

/// Rows at or below this count get leave-one-out when the fold count is automatic.
pub const LOO_MAX_ROWS: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPolicy {
    pub kind: SplitKind,
    /// `None` picks leave-one-out for small data, else 10 (outer) or 7 (inner) folds.
    #[serde(default)]
    pub n_folds: Option<usize>,
    /// Rows dropped on each side of every fold boundary (time-blocked only).
    #[serde(default)]
    pub gap: usize,
    /// Y column holding class labels (stratified only).
    #[serde(default)]
    pub strat_column: usize,
}

impl SplitPolicy {
    pub fn random(n_folds: usize) -> Self {
        Self {
            kind: SplitKind::Random,
            n_folds: Some(n_folds),
            gap: 0,
            strat_column: 0,
        }
    }

    pub fn auto(kind: SplitKind) -> Self {
        Self {
            kind,
            n_folds: None,
            gap: 0,
            strat_column: 0,
        }
    }

    pub fn with_folds(mut self, n_folds: usize) -> Self {
        self.n_folds = Some(n_folds);
        self
    }

    /// Concrete fold count for a block of `n_rows`.
    pub fn fold_count(&self, n_rows: usize, role: LoopRole) -> usize {
        self.n_folds.unwrap_or(if n_rows <= LOO_MAX_ROWS {
            n_rows
        } else {
            match role {
                LoopRole::Outer => 10,
                LoopRole::Inner => 7,
            }
        })
    }
}

/// Fold index per row; `None` marks rows excluded from every fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitPlan {
    fold_of_row: Vec<Option<usize>>,
}

impl SplitPlan {
    pub fn from_assignment(fold_of_row: Vec<Option<usize>>) -> Result<Self> {
        let plan = Self { fold_of_row };
        let k = plan.n_folds();
        for f in 0..k {
            if plan.test_rows(f).is_empty() {
                return Err(Error::InfeasibleSplit(format!("fold {f} is empty")));
            }
        }
        Ok(plan)
    }

    pub fn fold_of_row(&self) -> &[Option<usize>] {
        &self.fold_of_row
    }

    pub fn n_folds(&self) -> usize {
        self.fold_of_row.iter().flatten().max().map_or(0, |m| m + 1)
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&i| self.fold_of_row[i] == Some(fold))
            .collect()
    }

    /// Every non-excluded row outside `fold`.
    pub fn build_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&i| matches!(self.fold_of_row[i], Some(f) if f != fold))
            .collect()
    }

    pub fn excluded_rows(&self) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&i| self.fold_of_row[i].is_none())
            .collect()
    }
}

pub fn make_split(
    policy: &SplitPolicy,
    ds: &Dataset,
    role: LoopRole,
    rng: &RngStream,
) -> Result<SplitPlan> {
    let n = ds.n_rows();
    let k = policy.fold_count(n, role);
    if k < 2 || k > n {
        return Err(Error::InfeasibleSplit(format!(
            "{k} folds requested for {n} rows (need 2 <= folds <= rows)"
        )));
    }
    if policy.gap > 0 && policy.kind != SplitKind::TimeBlocked {
        return Err(Error::invalid("gap applies to time_blocked splits only"));
    }
    let mut g = rng.generator();
    let assignment = match policy.kind {
        SplitKind::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut g);
            let mut fold = vec![None; n];
            for (f, chunk) in chunk_bounds(n, k).into_iter().enumerate() {
                for &r in &order[chunk.0..chunk.1] {
                    fold[r] = Some(f);
                }
            }
            fold
        }
        SplitKind::Stratified => {
            let y = ds
                .y()
                .ok_or_else(|| Error::invalid("stratified split needs class labels in Y"))?;
            if policy.strat_column >= y.cols() {
                return Err(Error::invalid(format!(
                    "strat_column {} out of range for {} Y columns",
                    policy.strat_column,
                    y.cols()
                )));
            }
            let mut classes: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (i, v) in y.column(policy.strat_column).into_iter().enumerate() {
                classes.entry(class_key(v)).or_default().push(i);
            }
            let smallest = classes.values().map(Vec::len).min().unwrap_or(0);
            if smallest < k {
                return Err(Error::InfeasibleSplit(format!(
                    "{k} folds but the smallest class has {smallest} rows"
                )));
            }
            let mut keys: Vec<u64> = classes.keys().copied().collect();
            keys.sort_by(|a, b| f64::from_bits(*a).total_cmp(&f64::from_bits(*b)));
            let class_sizes: Vec<usize> = keys.iter().map(|key| classes[key].len()).collect();
            let fold_sizes: Vec<usize> = chunk_bounds(n, k).iter().map(|(a, b)| b - a).collect();
            let counts = stratified_counts(&fold_sizes, &class_sizes);
            let mut fold = vec![None; n];
            for (c, key) in keys.iter().enumerate() {
                let mut rows = classes[key].clone();
                rows.shuffle(&mut g);
                let mut rows = rows.into_iter();
                for (f, per_class) in counts.iter().enumerate() {
                    for r in rows.by_ref().take(per_class[c]) {
                        fold[r] = Some(f);
                    }
                }
            }
            fold
        }
        SplitKind::Grouped => {
            let groups = ds
                .groups()
                .ok_or_else(|| Error::invalid("grouped split needs group labels"))?;
            let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, gname) in groups.iter().enumerate() {
                members.entry(gname.as_str()).or_default().push(i);
            }
            if members.len() < k {
                return Err(Error::InfeasibleSplit(format!(
                    "{k} folds but only {} groups",
                    members.len()
                )));
            }
            let mut order: Vec<Vec<usize>> = members.into_values().collect();
            order.shuffle(&mut g);
            // Largest groups first, each to the currently smallest fold.
            order.sort_by_key(|rows| std::cmp::Reverse(rows.len()));
            let mut sizes = vec![0usize; k];
            let mut fold = vec![None; n];
            for rows in order {
                let f = (0..k).min_by_key(|&f| (sizes[f], f)).unwrap_or(0);
                sizes[f] += rows.len();
                for r in rows {
                    fold[r] = Some(f);
                }
            }
            fold
        }
        SplitKind::TimeBlocked => time_blocked(ds, k, policy.gap)?,
    };
    SplitPlan::from_assignment(assignment)
}

/// Rows of each class per fold, every count being the floor or ceiling of
/// `class_size · fold_size / n`, with fold and class totals preserved.
///
/// The floors are topped up by a max-flow between folds (needing
/// `fold_size - Σ floors` more rows) and classes (having
/// `class_size - Σ floors` rows left), one unit per cell with a
/// fractional target.
fn stratified_counts(fold_sizes: &[usize], class_sizes: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = fold_sizes.iter().sum();
    let (k, c) = (fold_sizes.len(), class_sizes.len());
    let mut counts: Vec<Vec<usize>> = fold_sizes
        .iter()
        .map(|&s| class_sizes.iter().map(|&nc| nc * s / n).collect())
        .collect();
    let mut fold_need: Vec<usize> = (0..k)
        .map(|f| fold_sizes[f] - counts[f].iter().sum::<usize>())
        .collect();
    let mut class_left: Vec<usize> = (0..c)
        .map(|j| class_sizes[j] - counts.iter().map(|row| row[j]).sum::<usize>())
        .collect();
    let fractional = |f: usize, j: usize| (class_sizes[j] * fold_sizes[f]) % n != 0;
    // Augmenting paths alternate fold -> class (unused cell) and
    // class -> fold (cell already topped up, undone).
    let mut topped = vec![vec![false; c]; k];
    for start in 0..k {
        while fold_need[start] > 0 {
            let mut prev_fold: Vec<Option<usize>> = vec![None; c];
            let mut prev_class: Vec<Option<usize>> = vec![None; k];
            let mut seen_fold = vec![false; k];
            seen_fold[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            let mut end = None;
            'search: while let Some(f) = queue.pop_front() {
                for j in 0..c {
                    if prev_fold[j].is_some() || topped[f][j] || !fractional(f, j) {
                        continue;
                    }
                    prev_fold[j] = Some(f);
                    if class_left[j] > 0 {
                        end = Some(j);
                        break 'search;
                    }
                    for g in 0..k {
                        if topped[g][j] && !seen_fold[g] {
                            seen_fold[g] = true;
                            prev_class[g] = Some(j);
                            queue.push_back(g);
                        }
                    }
                }
            }
            let Some(mut j) = end else { break };
            class_left[j] -= 1;
            loop {
                let f = prev_fold[j].unwrap_or(start);
                topped[f][j] = true;
                match prev_class[f] {
                    Some(j_prev) if f != start => {
                        topped[f][j_prev] = false;
                        j = j_prev;
                    }
                    _ => break,
                }
            }
            fold_need[start] -= 1;
        }
    }
    for f in 0..k {
        for j in 0..c {
            counts[f][j] += usize::from(topped[f][j]);
        }
    }
    counts
}

fn class_key(v: f64) -> u64 {
    // -0.0 and 0.0 are the same class
    (v + 0.0).to_bits()
}

/// Half-open bounds of `k` contiguous chunks of `0..n`, sizes within one.
fn chunk_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let b = (start, start + len);
            start += len;
            b
        })
        .collect()
}

fn time_blocked(ds: &Dataset, k: usize, gap: usize) -> Result<Vec<Option<usize>>> {
    let ts = ds
        .timestamps()
        .ok_or_else(|| Error::invalid("time_blocked split needs timestamps"))?;
    let n = ts.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));

    // Boundaries in sorted positions; pushed forward past timestamp ties so
    // no instant straddles two folds.
    let mut starts = Vec::with_capacity(k);
    for (f, (start, _)) in chunk_bounds(n, k).into_iter().enumerate() {
        if f == 0 {
            starts.push(0);
            continue;
        }
        let mut s = start.max(starts[f - 1] + 1);
        while s < n && ts[order[s]] == ts[order[s - 1]] {
            s += 1;
        }
        if s >= n {
            return Err(Error::InfeasibleSplit(
                "timestamp ties leave too few distinct blocks".into(),
            ));
        }
        starts.push(s);
    }
    let mut fold = vec![None; n];
    for f in 0..k {
        let lo = starts[f] + if f > 0 { gap } else { 0 };
        let end = if f + 1 < k { starts[f + 1] } else { n };
        let hi = if f + 1 < k { end.saturating_sub(gap) } else { end };
        if lo >= hi {
            return Err(Error::InfeasibleSplit(format!(
                "gap {gap} empties time block {f} of {k}"
            )));
        }
        for &r in &order[lo..hi] {
            fold[r] = Some(f);
        }
    }
    Ok(fold)
}
