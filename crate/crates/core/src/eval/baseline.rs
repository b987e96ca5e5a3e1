use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CategoryScore, Confusion, EvalError};
use crate::category::VulnCategory;
use crate::findings::{normalize_category, CategoryToken};

/// Per-category accuracy published by an external tool.
///
/// Two text layouts are accepted. The minimal one is `category,percent`
/// per line, with optional `# tool: NAME` and `# subset: NAME` comment
/// directives. The native layout has a header row naming `TP`, `FN`, `TN`
/// and `FP` columns next to a category column, and accuracy is derived
/// from the counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineScorecard {
    pub tool: String,
    /// Subset the numbers were measured on, if stated.
    pub subset: Option<String>,
    pub scores: BTreeMap<VulnCategory, CategoryScore>,
}

impl BaselineScorecard {
    /// `None` means the tool did not cover the category.
    pub fn accuracy(&self, category: VulnCategory) -> Option<f64> {
        self.scores.get(&category).map(|s| s.accuracy)
    }
}

pub fn ingest_baseline_scorecard(path: &Path) -> Result<BaselineScorecard, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::File {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let default_tool = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "baseline".into());
    parse_baseline_scorecard(&text, &default_tool)
}

fn malformed(line: usize, msg: impl std::fmt::Display) -> EvalError {
    EvalError::MalformedScorecard(format!("line {line}: {msg}"))
}

fn category_of(field: &str, line: usize) -> Result<VulnCategory, EvalError> {
    match normalize_category(field) {
        Some(CategoryToken::Vuln(c)) => Ok(c),
        _ => Err(malformed(line, format_args!("unknown category `{}`", field.trim()))),
    }
}

pub fn parse_baseline_scorecard(text: &str, default_tool: &str) -> Result<BaselineScorecard, EvalError> {
    let mut tool = None;
    let mut subset = None;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((key, value)) = comment.split_once(':') {
                match key.trim().to_ascii_lowercase().as_str() {
                    "tool" => tool = Some(value.trim().to_string()),
                    "subset" => subset = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let fields = line.split(',').map(|f| f.trim().trim_matches('"').to_string()).collect();
        rows.push((idx + 1, fields));
    }
    if rows.is_empty() {
        return Err(EvalError::MalformedScorecard("no scores".into()));
    }

    let header: Vec<String> = rows[0].1.iter().map(|f| f.to_ascii_lowercase()).collect();
    let has = |name: &str| header.iter().any(|h| h == name);
    let scores = if ["tp", "fn", "tn", "fp"].iter().all(|c| has(c)) {
        parse_native(&header, &rows[1..])?
    } else {
        let body = if rows[0].1.get(1).map_or(false, |f| parse_percent(f).is_none()) {
            &rows[1..]
        } else {
            &rows[..]
        };
        parse_minimal(body)?
    };
    if scores.is_empty() {
        return Err(EvalError::MalformedScorecard("no scores".into()));
    }
    Ok(BaselineScorecard {
        tool: tool.unwrap_or_else(|| default_tool.to_string()),
        subset,
        scores,
    })
}

fn parse_percent(field: &str) -> Option<f64> {
    let v: f64 = field.trim().trim_end_matches('%').trim().parse().ok()?;
    (v.is_finite() && (0.0..=100.0).contains(&v)).then_some(v)
}

fn insert(
    scores: &mut BTreeMap<VulnCategory, CategoryScore>,
    score: CategoryScore,
    line: usize,
) -> Result<(), EvalError> {
    if scores.insert(score.category, score).is_some() {
        return Err(malformed(line, format_args!("duplicate category {}", score.category.code())));
    }
    Ok(())
}

fn parse_minimal(rows: &[(usize, Vec<String>)]) -> Result<BTreeMap<VulnCategory, CategoryScore>, EvalError> {
    let mut scores = BTreeMap::new();
    for (line, fields) in rows {
        if fields.len() < 2 {
            return Err(malformed(*line, "expected `category,percent`"));
        }
        let category = category_of(&fields[0], *line)?;
        let pct = parse_percent(&fields[1])
            .ok_or_else(|| malformed(*line, format_args!("bad percentage `{}`", fields[1])))?;
        let score = CategoryScore {
            category,
            counts: None,
            accuracy: pct / 100.0,
        };
        insert(&mut scores, score, *line)?;
    }
    Ok(scores)
}

fn parse_native(
    header: &[String],
    rows: &[(usize, Vec<String>)],
) -> Result<BTreeMap<VulnCategory, CategoryScore>, EvalError> {
    let col = |name: &str| header.iter().position(|h| h == name).expect("checked by caller");
    let category_col = header
        .iter()
        .position(|h| h.contains("category") || h == "cwe" || h == "vulnerability")
        .unwrap_or(0);
    let (tp, fnc, tn, fp) = (col("tp"), col("fn"), col("tn"), col("fp"));
    let mut scores = BTreeMap::new();
    for (line, fields) in rows {
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        let name = fields.get(category_col).map(String::as_str).unwrap_or_default();
        // summary rows such as "Totals" or "Average" carry no category
        if matches!(name.to_ascii_lowercase().as_str(), "total" | "totals" | "average" | "overall") {
            continue;
        }
        let category = category_of(name, *line)?;
        let count = |i: usize| -> Result<usize, EvalError> {
            let f = fields.get(i).map(String::as_str).unwrap_or_default();
            f.parse().map_err(|_| malformed(*line, format_args!("bad count `{f}`")))
        };
        let counts = Confusion {
            detected_vulnerable: count(tp)?,
            missed: count(fnc)?,
            rejected_clean: count(tn)?,
            false_flagged: count(fp)?,
        };
        let accuracy = counts
            .accuracy()
            .ok_or_else(|| malformed(*line, "all counts are zero"))?;
        insert(
            &mut scores,
            CategoryScore {
                category,
                counts: Some(counts),
                accuracy,
            },
            *line,
        )?;
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_layout_with_directives() {
        let text = "# tool: SonarQube\n# subset: all\ncategory,accuracy\ncmdi,49.8\nsqli, 50.4%\n";
        let card = parse_baseline_scorecard(text, "x").unwrap();
        assert_eq!(card.tool, "SonarQube");
        assert_eq!(card.subset.as_deref(), Some("all"));
        assert!((card.accuracy(VulnCategory::Cmdi).unwrap() - 0.498).abs() < 1e-12);
        assert_eq!(card.accuracy(VulnCategory::Xss), None);
    }

    #[test]
    fn native_layout_derives_accuracy() {
        let text = "Category,CWE #,TP,FN,TN,FP,Total\n\
                    Command Injection,78,10,0,5,5,20\n\
                    Weak Randomness,330,3,1,4,0,8\n\
                    Totals,,13,1,9,5,28\n";
        let card = parse_baseline_scorecard(text, "owasp").unwrap();
        assert_eq!(card.tool, "owasp");
        assert_eq!(card.accuracy(VulnCategory::Cmdi), Some(0.75));
        assert_eq!(card.accuracy(VulnCategory::Weakrand), Some(7.0 / 8.0));
        assert_eq!(card.scores.len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["", "# tool: x\n", "cmdi,140\n", "sqli,2\ncmdi,abc\n", "bogus,50\n", "cmdi,1\ncmdi,2\n"] {
            assert!(
                matches!(parse_baseline_scorecard(text, "t"), Err(EvalError::MalformedScorecard(_))),
                "{text:?}"
            );
        }
    }
}
