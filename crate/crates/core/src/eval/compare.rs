use serde::{Deserialize, Serialize};

use super::{BaselineScorecard, EvalError, RunRecord};
use crate::category::VulnCategory;
use crate::prompt::PromptMode;
use crate::split::Subset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    /// Accuracy as a fraction in [0, 1].
    Value(f64),
    /// The run had no cases in this category.
    NotApplicable,
    /// The baseline tool does not report this category.
    NotCovered,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonColumn {
    pub label: String,
    /// Subset the column's numbers come from; `None` when a baseline does
    /// not say.
    pub subset: Option<String>,
    pub is_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub category: VulnCategory,
    pub mode: PromptMode,
    /// One cell per column, in column order.
    pub cells: Vec<Cell>,
}

/// Category-by-prompt-mode accuracy table: baseline columns first, then
/// one column per backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<ComparisonColumn>,
    pub rows: Vec<ComparisonRow>,
}

fn mode_rank(mode: PromptMode) -> u8 {
    match mode {
        PromptMode::Base => 0,
        PromptMode::AugmentedExpectedCategory => 1,
        PromptMode::AugmentedAll => 2,
    }
}

/// Builds the comparison table. All runs must cover the same subset of the
/// same split. Rows are ordered by category, then prompt mode.
pub fn compare(runs: &[RunRecord], baselines: &[BaselineScorecard]) -> Result<ComparisonTable, EvalError> {
    if runs.is_empty() && baselines.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    if let Some(first) = runs.first() {
        let key = first.subset_key();
        if let Some(other) = runs.iter().find(|r| r.subset_key() != key) {
            return Err(EvalError::SubsetMismatch(format!(
                "{} uses `{}`, {} uses `{}`",
                first.run_label,
                first.config.subset,
                other.run_label,
                other.config.subset
            )));
        }
    }

    let mut backends: Vec<&str> = Vec::new();
    let mut modes: Vec<PromptMode> = Vec::new();
    for run in runs {
        if !backends.contains(&run.backend()) {
            backends.push(run.backend());
        }
        if !modes.contains(&run.mode()) {
            modes.push(run.mode());
        }
    }
    modes.sort_by_key(|m| mode_rank(*m));
    if baselines.len() > 0 && modes.is_empty() {
        modes.push(PromptMode::Base);
    }
    for (i, a) in runs.iter().enumerate() {
        if runs[..i].iter().any(|b| b.backend() == a.backend() && b.mode() == a.mode()) {
            return Err(EvalError::DuplicateRun(format!("{} / {}", a.backend(), a.mode().label())));
        }
    }

    let run_subset = runs.first().map(|r| r.config.subset.label().to_string());
    let mut columns: Vec<ComparisonColumn> = baselines
        .iter()
        .map(|b| ComparisonColumn {
            label: b.tool.clone(),
            subset: b.subset.clone(),
            is_baseline: true,
        })
        .collect();
    columns.extend(backends.iter().map(|name| ComparisonColumn {
        label: name.to_string(),
        subset: run_subset.clone(),
        is_baseline: false,
    }));

    let mut rows = Vec::new();
    for category in VulnCategory::ALL {
        for &mode in &modes {
            let mut cells: Vec<Cell> = baselines
                .iter()
                .map(|b| b.accuracy(category).map_or(Cell::NotCovered, Cell::Value))
                .collect();
            for name in &backends {
                let run = runs.iter().find(|r| r.backend() == *name && r.mode() == mode);
                cells.push(
                    run.and_then(|r| r.scores.accuracy(category))
                        .map_or(Cell::NotApplicable, Cell::Value),
                );
            }
            rows.push(ComparisonRow { category, mode, cells });
        }
    }
    Ok(ComparisonTable { columns, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub category: VulnCategory,
    pub base: Option<f64>,
    pub other: Option<f64>,
    /// `other - base`, when both exist.
    pub delta: Option<f64>,
    pub regression: bool,
}

/// Per-category change from one run to another (typically base prompt to
/// augmented prompt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffTable {
    pub base_label: String,
    pub other_label: String,
    pub subset: Subset,
    pub rows: Vec<DiffRow>,
}

impl DiffTable {
    pub fn regressions(&self) -> impl Iterator<Item = &DiffRow> {
        self.rows.iter().filter(|r| r.regression)
    }
}

pub fn diff_runs(base: &RunRecord, other: &RunRecord) -> Result<DiffTable, EvalError> {
    if base.subset_key() != other.subset_key() {
        return Err(EvalError::SubsetMismatch(format!(
            "{} uses `{}`, {} uses `{}`",
            base.run_label, base.config.subset, other.run_label, other.config.subset
        )));
    }
    let rows: Vec<DiffRow> = VulnCategory::ALL
        .iter()
        .map(|&category| {
            let b = base.scores.accuracy(category);
            let o = other.scores.accuracy(category);
            let delta = b.zip(o).map(|(b, o)| o - b);
            DiffRow {
                category,
                base: b,
                other: o,
                delta,
                regression: delta.is_some_and(|d| d < -1e-12),
            }
        })
        .collect();
    if rows.iter().all(|r| r.delta.is_none()) {
        return Err(EvalError::DisjointRuns);
    }
    Ok(DiffTable {
        base_label: base.run_label.clone(),
        other_label: other.run_label.clone(),
        subset: base.config.subset,
        rows,
    })
}
