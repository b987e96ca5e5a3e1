//! Experiment runs, per-category accuracy, baselines, comparison and triage.
//!
//! Accuracy for a category is the number of correctly predicted cases
//! (vulnerable cases flagged plus clean cases left alone) divided by the
//! number of cases. A case counts as flagged only when the analyzer reports
//! the case's own category; findings in other categories are kept for
//! triage but never make a clean case wrong.

mod baseline;
mod compare;
mod run;
mod triage;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, CacheKey};
use crate::category::VulnCategory;
use crate::corpus::GroundTruth;
use crate::findings::Verdict;

pub use baseline::{ingest_baseline_scorecard, parse_baseline_scorecard, BaselineScorecard};
pub use compare::{compare, diff_runs, Cell, ComparisonColumn, ComparisonRow, ComparisonTable, DiffRow, DiffTable};
pub use run::{run_experiment, ConfigSnapshot, ExperimentConfig, RunRecord, SplitInfo};
pub use triage::{triage, TriageEntry, TriageReport};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no case results to score")]
    EmptyResults,
    #[error("malformed scorecard: {0}")]
    MalformedScorecard(String),
    #[error("runs cover different subsets: {0}")]
    SubsetMismatch(String),
    #[error("runs share no scored category")]
    DisjointRuns,
    #[error("more than one run for {0}")]
    DuplicateRun(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("{path}: {reason}")]
    File { path: String, reason: String },
}

/// The four outcomes for a category's cases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Vulnerable and flagged.
    pub detected_vulnerable: usize,
    /// Clean and not flagged.
    pub rejected_clean: usize,
    /// Vulnerable but not flagged.
    pub missed: usize,
    /// Clean but flagged.
    pub false_flagged: usize,
}

impl Confusion {
    pub fn n(&self) -> usize {
        self.detected_vulnerable + self.rejected_clean + self.missed + self.false_flagged
    }

    pub fn correct(&self) -> usize {
        self.detected_vulnerable + self.rejected_clean
    }

    pub fn accuracy(&self) -> Option<f64> {
        match self.n() {
            0 => None,
            n => Some(self.correct() as f64 / n as f64),
        }
    }

    fn record(&mut self, truth_vulnerable: bool, predicted_vulnerable: bool) {
        match (truth_vulnerable, predicted_vulnerable) {
            (true, true) => self.detected_vulnerable += 1,
            (false, false) => self.rejected_clean += 1,
            (true, false) => self.missed += 1,
            (false, true) => self.false_flagged += 1,
        }
    }
}

/// Accuracy for one category. Counts are always present for scored runs
/// and optional for external baselines that only publish a rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub category: VulnCategory,
    pub counts: Option<Confusion>,
    /// Fraction in [0, 1].
    pub accuracy: f64,
}

impl CategoryScore {
    pub fn n(&self) -> Option<usize> {
        self.counts.map(|c| c.n())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    /// Only categories with at least one case appear.
    pub categories: BTreeMap<VulnCategory, CategoryScore>,
    pub overall: Overall,
}

impl Scorecard {
    pub fn accuracy(&self, category: VulnCategory) -> Option<f64> {
        self.categories.get(&category).map(|s| s.accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub expected: GroundTruth,
    pub verdict: Verdict,
    /// Cache key of the prompt that produced the response.
    pub raw_ref: Option<CacheKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    pub correct: bool,
    /// Error tag when the backend produced no usable response; such cases
    /// are scored as predicted clean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
    #[serde(default)]
    pub from_cache: bool,
}

impl CaseResult {
    pub fn new(expected: GroundTruth, verdict: Verdict) -> Self {
        CaseResult {
            case_id: verdict.case_id.clone(),
            correct: expected.is_vulnerable == verdict.predicted_vulnerable,
            expected,
            verdict,
            raw_ref: None,
            raw_response: None,
            failure: None,
            failure_detail: None,
            from_cache: false,
        }
    }
}

pub fn score(results: &[CaseResult]) -> Result<Scorecard, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    let mut counts: BTreeMap<VulnCategory, Confusion> = BTreeMap::new();
    for r in results {
        counts
            .entry(r.expected.category)
            .or_default()
            .record(r.expected.is_vulnerable, r.verdict.predicted_vulnerable);
    }
    let categories = counts
        .into_iter()
        .map(|(category, c)| {
            let score = CategoryScore {
                category,
                counts: Some(c),
                accuracy: c.accuracy().expect("categories in the map have cases"),
            };
            (category, score)
        })
        .collect::<BTreeMap<_, _>>();
    let n = results.len();
    let correct = categories
        .values()
        .map(|s| s.counts.map_or(0, |c| c.correct()))
        .sum::<usize>();
    Ok(Scorecard {
        categories,
        overall: Overall {
            n,
            correct,
            accuracy: correct as f64 / n as f64,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn result(category: VulnCategory, vulnerable: bool, predicted: bool, id: &str) -> CaseResult {
        CaseResult::new(
            GroundTruth {
                category,
                is_vulnerable: vulnerable,
                cwe: None,
            },
            Verdict {
                case_id: id.into(),
                expected_category: category,
                predicted_vulnerable: predicted,
                matched_findings: vec![],
                off_category_findings: vec![],
            },
        )
    }

    #[test]
    fn four_cmdi_cases_one_false_flag() {
        let results = vec![
            result(VulnCategory::Cmdi, true, true, "a"),
            result(VulnCategory::Cmdi, true, true, "b"),
            result(VulnCategory::Cmdi, false, false, "c"),
            result(VulnCategory::Cmdi, false, true, "d"),
        ];
        let card = score(&results).unwrap();
        let cmdi = card.categories[&VulnCategory::Cmdi];
        assert_eq!(cmdi.accuracy, 0.75);
        assert_eq!(
            cmdi.counts.unwrap(),
            Confusion {
                detected_vulnerable: 2,
                rejected_clean: 1,
                missed: 0,
                false_flagged: 1
            }
        );
        assert_eq!(card.overall.correct, 3);
    }

    #[test]
    fn all_correct_and_single_wrong() {
        let all: Vec<_> = VulnCategory::ALL
            .iter()
            .enumerate()
            .map(|(i, &c)| result(c, i % 2 == 0, i % 2 == 0, &i.to_string()))
            .collect();
        let card = score(&all).unwrap();
        assert!(card.categories.values().all(|s| s.accuracy == 1.0));
        assert_eq!(card.overall.accuracy, 1.0);

        let one = score(&[result(VulnCategory::Xss, true, false, "x")]).unwrap();
        assert_eq!(one.accuracy(VulnCategory::Xss), Some(0.0));
        assert_eq!(one.accuracy(VulnCategory::Sqli), None);
    }

    #[test]
    fn empty_results_error() {
        assert!(matches!(score(&[]), Err(EvalError::EmptyResults)));
    }

    #[test]
    fn correctness_follows_truth() {
        assert!(result(VulnCategory::Hash, false, false, "a").correct);
        assert!(!result(VulnCategory::Hash, false, true, "a").correct);
    }
}
