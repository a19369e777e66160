//! The only path by which engine code reads dataset rows.
//!
//! Every read names its purpose and scope, so a probe can audit that no
//! held-out row is touched while a model is being built.

use std::sync::Mutex;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::matrix::Matrix;

use super::report::ValidationReport;

/// Why rows are being read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Split annotations (labels, groups, timestamps) used to assign folds.
    Split,
    /// Whole-dataset variable selection; only the watermarked leaky mode does this.
    PreSplitSelection,
    /// Any fitting on build rows.
    Build,
    /// Predictor rows of a held-out fold.
    Predict,
    /// Response rows of a held-out fold, read for scoring.
    Truth,
}

/// Position in the resampling tree. `outer_fold == None` is the whole
/// dataset; `inner_fold == None` with an outer fold is its build portion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Scope {
    pub repetition: usize,
    pub outer_fold: Option<usize>,
    pub inner_fold: Option<usize>,
    /// Reads made for a mean-only or majority-class reference model.
    pub baseline: bool,
}

impl Scope {
    pub const WHOLE: Scope = Scope {
        repetition: 0,
        outer_fold: None,
        inner_fold: None,
        baseline: false,
    };

    pub fn outer(repetition: usize, fold: usize) -> Self {
        Self {
            repetition,
            outer_fold: Some(fold),
            inner_fold: None,
            baseline: false,
        }
    }

    pub fn for_baseline(self) -> Self {
        Self {
            baseline: true,
            ..self
        }
    }

    pub fn inner(self, fold: usize) -> Self {
        Self {
            inner_fold: Some(fold),
            ..self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AccessEvent {
    pub stage: Stage,
    pub scope: Scope,
    /// Original dataset row indices.
    pub rows: Vec<usize>,
}

pub trait AccessProbe: Sync {
    fn record(&self, event: AccessEvent);
}

/// Keeps every event in arrival order.
#[derive(Debug, Default)]
pub struct RecordingProbe {
    events: Mutex<Vec<AccessEvent>>,
}

impl RecordingProbe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> Vec<AccessEvent> {
        self.events.lock().map(|e| e.clone()).unwrap_or_default()
    }
}

impl AccessProbe for RecordingProbe {
    fn record(&self, event: AccessEvent) {
        if let Ok(mut events) = self.events.lock() {
            events.push(event);
        }
    }
}

/// Build-row blocks in raw units.
pub(crate) struct Block {
    pub x: Matrix,
    pub y: Matrix,
}

#[derive(Clone, Copy)]
pub struct DataAccess<'a> {
    ds: &'a Dataset,
    probe: Option<&'a dyn AccessProbe>,
}

impl<'a> DataAccess<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        Self { ds, probe: None }
    }

    pub fn with_probe(ds: &'a Dataset, probe: &'a dyn AccessProbe) -> Self {
        Self {
            ds,
            probe: Some(probe),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.ds.n_rows()
    }

    pub fn n_vars(&self) -> usize {
        self.ds.n_vars()
    }

    fn log(&self, stage: Stage, scope: Scope, rows: &[usize]) {
        if let Some(p) = self.probe {
            p.record(AccessEvent {
                stage,
                scope,
                rows: rows.to_vec(),
            });
        }
    }

    /// Rows restricted for fold assignment.
    pub(crate) fn split_view(&self, scope: Scope, rows: &[usize]) -> Result<Dataset> {
        self.log(Stage::Split, scope, rows);
        self.ds.subset(rows)
    }

    /// One response column over `rows`, for split-time needs such as the
    /// class set.
    pub(crate) fn labels(&self, scope: Scope, rows: &[usize], column: usize) -> Result<Vec<f64>> {
        self.log(Stage::Split, scope, rows);
        let y = self.ds.require_y()?.gather_rows(rows)?;
        Ok(y.column(column))
    }

    pub(crate) fn whole_for_selection(&self) -> Result<Block> {
        let rows: Vec<usize> = (0..self.ds.n_rows()).collect();
        self.log(Stage::PreSplitSelection, Scope::WHOLE, &rows);
        Ok(Block {
            x: self.ds.x().clone(),
            y: self.ds.require_y()?.clone(),
        })
    }

    pub(crate) fn build(&self, scope: Scope, rows: &[usize]) -> Result<Block> {
        self.log(Stage::Build, scope, rows);
        Ok(Block {
            x: self.ds.x().gather_rows(rows)?,
            y: self.ds.require_y()?.gather_rows(rows)?,
        })
    }

    pub(crate) fn predictors(&self, scope: Scope, rows: &[usize]) -> Result<Matrix> {
        self.log(Stage::Predict, scope, rows);
        self.ds.x().gather_rows(rows)
    }

    pub(crate) fn truth(&self, scope: Scope, rows: &[usize]) -> Result<Matrix> {
        self.log(Stage::Truth, scope, rows);
        self.ds.require_y()?.gather_rows(rows)
    }
}
/// Counts firewall breaches in the events recorded while producing `report`.
///
/// Reads scoped to an outer fold must not touch its held-out rows while
/// building, and building must finish before that fold is predicted.
/// Baseline reads are checked for held-out rows only. Any whole-data
/// selection read is a breach. Inner training reads must avoid their own
/// validation rows.
pub fn firewall_violations(events: &[AccessEvent], report: &ValidationReport) -> usize {
    let plans: Vec<&[Option<usize>]> =
        report.per_repetition.iter().map(|p| p.outer_plan.fold_of_row()).collect();
    let mut violations = 0;
    for (rep, plan) in plans.iter().enumerate() {
        let k = plan.iter().flatten().max().map_or(0, |m| m + 1);
        for f in 0..k {
            let held: Vec<usize> = (0..plan.len()).filter(|&i| plan[i] == Some(f)).collect();
            let mut predicted = false;
            for e in events {
                let in_fold = e.scope.repetition == rep && e.scope.outer_fold == Some(f);
                let in_fold = in_fold && !e.scope.baseline;
                match e.stage {
                    Stage::PreSplitSelection => violations += 1,
                    Stage::Build if in_fold => {
                        if predicted && e.scope.inner_fold.is_none() {
                            violations += 1;
                        }
                        violations += e.rows.iter().filter(|r| held.contains(r)).count();
                    }
                    Stage::Predict | Stage::Truth if in_fold && e.scope.inner_fold.is_none() => {
                        predicted = true;
                    }
                    Stage::Build if e.scope.repetition == rep && e.scope.outer_fold == Some(f) => {
                        violations += e.rows.iter().filter(|r| held.contains(r)).count();
                    }
                    _ => {}
                }
            }
        }
    }
    // Inner folds: training reads never include their own validation rows.
    for e in events.iter().filter(|e| e.stage == Stage::Build && e.scope.inner_fold.is_some()) {
        let valid: Vec<usize> = events
            .iter()
            .filter(|v| v.scope == e.scope && v.stage == Stage::Predict)
            .flat_map(|v| v.rows.clone())
            .collect();
        violations += e.rows.iter().filter(|r| valid.contains(r)).count();
    }
    violations
}

