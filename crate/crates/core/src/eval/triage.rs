use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::backend::CacheKey;
use crate::category::{ErrorClass, VulnCategory};
use crate::corpus::Corpus;
use crate::findings::Finding;
use crate::split::{CorpusSplit, Subset};

const EXCERPT_CHARS: usize = 240;

/// One misclassified case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageEntry {
    pub case_id: String,
    pub category: VulnCategory,
    pub truly_vulnerable: bool,
    pub predicted_vulnerable: bool,
    pub failure: Option<String>,
    pub matched_findings: Vec<Finding>,
    pub off_category_findings: Vec<Finding>,
    pub raw_ref: Option<CacheKey>,
    pub response_excerpt: Option<String>,
    /// Source line the first finding points at, when the corpus is at hand.
    pub flagged_source_line: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub run_label: String,
    pub groups: BTreeMap<ErrorClass, BTreeMap<VulnCategory, Vec<TriageEntry>>>,
}

impl TriageReport {
    pub fn len(&self) -> usize {
        self.groups.values().flat_map(|g| g.values()).map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = &TriageEntry> {
        self.groups.values().flat_map(|g| g.values()).flatten()
    }
}

fn excerpt(text: &str) -> String {
    let mut out: String = text.chars().take(EXCERPT_CHARS).collect();
    if text.chars().count() > EXCERPT_CHARS {
        out.push_str("...");
    }
    out
}

/// Groups the run's wrong verdicts by error class, then category. With a
/// split and a `Train` or `Test` filter only cases in that subset appear.
pub fn triage(
    run: &RunRecord,
    corpus: Option<&Corpus>,
    split: Option<&CorpusSplit>,
    filter: Subset,
) -> TriageReport {
    let mut report = TriageReport {
        run_label: run.run_label.clone(),
        groups: BTreeMap::new(),
    };
    for r in run.results.iter().filter(|r| !r.correct) {
        if let (Some(split), Subset::Train | Subset::Test) = (split, filter) {
            if !split.contains(filter, &r.case_id) {
                continue;
            }
        }
        let category = r.expected.category;
        let flagged_source_line = corpus.and_then(|c| {
            let finding = r
                .verdict
                .matched_findings
                .first()
                .or(r.verdict.off_category_findings.first())?;
            let line = finding.line.checked_sub(1)? as usize;
            c.get(&r.case_id)?
                .source_text
                .lines()
                .nth(line)
                .map(|l| l.trim().to_string())
        });
        let entry = TriageEntry {
            case_id: r.case_id.clone(),
            category,
            truly_vulnerable: r.expected.is_vulnerable,
            predicted_vulnerable: r.verdict.predicted_vulnerable,
            failure: r.failure.clone(),
            matched_findings: r.verdict.matched_findings.clone(),
            off_category_findings: r.verdict.off_category_findings.clone(),
            raw_ref: r.raw_ref.clone(),
            response_excerpt: r.raw_response.as_deref().map(excerpt),
            flagged_source_line,
        };
        report
            .groups
            .entry(category.error_class())
            .or_default()
            .entry(category)
            .or_default()
            .push(entry);
    }
    report
}
