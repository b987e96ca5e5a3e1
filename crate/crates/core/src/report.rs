//! Text rendering of distributions, scorecards, comparison and diff tables
//! and triage reports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::VulnCategory;
use crate::corpus::Distribution;
use crate::eval::{Cell, ComparisonTable, DiffTable, Scorecard, TriageReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
    Plain,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "plain" | "text" | "txt" => Ok(ReportFormat::Plain),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// Accuracy as a percentage with one decimal.
pub fn percent(fraction: f64) -> String {
    format!("{:.1}", fraction * 100.0)
}

fn signed_points(delta: f64) -> String {
    let s = format!("{:+.1}", delta * 100.0);
    if s == "-0.0" {
        "+0.0".into()
    } else {
        s
    }
}

/// A rectangular table of strings that renders in any [`ReportFormat`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Markdown => self.markdown(),
            ReportFormat::Csv => self.csv(),
            ReportFormat::Plain => self.plain(),
        }
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| format!("| {} |\n", cells.iter().map(|c| c.replace('|', "\\|")).collect::<Vec<_>>().join(" | "));
        out.push_str(&line(&self.header));
        let rule: Vec<String> = self
            .header
            .iter()
            .enumerate()
            .map(|(i, _)| if i == 0 { "---".to_string() } else { "---:".to_string() })
            .collect();
        out.push_str(&format!("|{}|\n", rule.iter().map(|r| format!(" {r} ")).collect::<Vec<_>>().join("|")));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    fn csv(&self) -> String {
        let field = |f: &String| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        };
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&row.iter().map(field).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    fn plain(&self) -> String {
        let cols = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (i, c) in row.iter().enumerate().take(cols) {
                widths[i] = widths[i].max(c.chars().count());
            }
        }
        let mut out = String::new();
        let mut emit = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        emit(&self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        emit(&rule);
        for row in &self.rows {
            emit(row);
        }
        out
    }
}

/// Per-category vulnerable, clean and total counts with a totals row.
pub fn distribution_table(dist: &Distribution) -> Table {
    let mut t = Table::new(["Category", "Code", "Vulnerable", "Not Vulnerable", "Total"]);
    for c in VulnCategory::ALL {
        let n = dist.get(c);
        t.push([
            c.display_name().to_string(),
            c.code().to_string(),
            n.vulnerable.to_string(),
            n.clean.to_string(),
            n.total().to_string(),
        ]);
    }
    let totals = dist.totals();
    t.push([
        "Total".to_string(),
        String::new(),
        totals.vulnerable.to_string(),
        totals.clean.to_string(),
        totals.total().to_string(),
    ]);
    t
}

pub fn render_distribution(dist: &Distribution, format: ReportFormat) -> String {
    distribution_table(dist).render(format)
}

pub fn scorecard_table(card: &Scorecard) -> Table {
    let mut t = Table::new(["Category", "Cases", "Correct", "Accuracy (%)"]);
    for s in card.categories.values() {
        let counts = s.counts.unwrap_or_default();
        t.push([
            s.category.display_name().to_string(),
            counts.n().to_string(),
            counts.correct().to_string(),
            percent(s.accuracy),
        ]);
    }
    t.push([
        "Overall".to_string(),
        card.overall.n.to_string(),
        card.overall.correct.to_string(),
        percent(card.overall.accuracy),
    ]);
    t
}

pub fn render_scorecard(card: &Scorecard, format: ReportFormat) -> String {
    scorecard_table(card).render(format)
}

fn cell_text(cell: Cell) -> String {
    match cell {
        Cell::Value(v) => percent(v),
        Cell::NotApplicable => "n/a".into(),
        Cell::NotCovered => "not covered".into(),
    }
}

pub fn comparison_table(table: &ComparisonTable) -> Table {
    let mut header = vec!["Category".to_string(), "Prompt".to_string()];
    header.extend(table.columns.iter().map(|c| match &c.subset {
        Some(s) => format!("{} ({s})", c.label),
        None => c.label.clone(),
    }));
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for row in &table.rows {
        let mut cells = vec![row.category.display_name().to_string(), row.mode.label().to_string()];
        cells.extend(row.cells.iter().map(|c| cell_text(*c)));
        t.rows.push(cells);
    }
    t
}

pub fn render_comparison(table: &ComparisonTable, format: ReportFormat) -> String {
    comparison_table(table).render(format)
}

pub fn diff_table(diff: &DiffTable) -> Table {
    let mut t = Table::new([
        "Category".to_string(),
        diff.base_label.clone(),
        diff.other_label.clone(),
        "Change (pts)".to_string(),
        "Regression".to_string(),
    ]);
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), percent);
    for row in &diff.rows {
        t.push([
            row.category.display_name().to_string(),
            opt(row.base),
            opt(row.other),
            row.delta.map_or("n/a".to_string(), signed_points),
            if row.regression { "yes" } else { "" }.to_string(),
        ]);
    }
    t
}

pub fn render_diff(diff: &DiffTable, format: ReportFormat) -> String {
    diff_table(diff).render(format)
}

/// Misclassified cases grouped under error-class and category headings.
/// CSV output is one row per case.
pub fn render_triage(report: &TriageReport, format: ReportFormat) -> String {
    if format == ReportFormat::Csv {
        let mut t = Table::new([
            "error_class", "category", "case_id", "truth", "predicted", "failure", "findings",
        ]);
        for (class, cats) in &report.groups {
            for (cat, entries) in cats {
                for e in entries {
                    let findings: Vec<String> = e
                        .matched_findings
                        .iter()
                        .chain(&e.off_category_findings)
                        .map(|f| format!("{}:{}", f.category.code(), f.line))
                        .collect();
                    t.push([
                        class.label().to_string(),
                        cat.code().to_string(),
                        e.case_id.clone(),
                        verdict_word(e.truly_vulnerable).to_string(),
                        verdict_word(e.predicted_vulnerable).to_string(),
                        e.failure.clone().unwrap_or_default(),
                        findings.join(" "),
                    ]);
                }
            }
        }
        return t.render(ReportFormat::Csv);
    }

    let md = format == ReportFormat::Markdown;
    let mut out = String::new();
    let _ = writeln!(out, "{}Triage: {} ({} misclassified)", if md { "# " } else { "" }, report.run_label, report.len());
    for (class, cats) in &report.groups {
        let _ = writeln!(out, "\n{}{}", if md { "## " } else { "== " }, class.label());
        for (cat, entries) in cats {
            let _ = writeln!(out, "\n{}{} ({})", if md { "### " } else { "-- " }, cat.display_name(), entries.len());
            for e in entries {
                let kind = if e.truly_vulnerable { "missed" } else { "false alarm" };
                let _ = write!(out, "{}{}: {kind}", if md { "- " } else { "  " }, e.case_id);
                if let Some(f) = &e.failure {
                    let _ = write!(out, " [backend failure: {f}]");
                }
                out.push('\n');
                for f in e.matched_findings.iter().chain(&e.off_category_findings) {
                    let _ = writeln!(out, "    {} line {}: {}", f.category.code(), f.line, f.reason);
                }
                if let Some(src) = &e.flagged_source_line {
                    let _ = writeln!(out, "    source: {src}");
                }
                if e.matched_findings.is_empty() && e.off_category_findings.is_empty() {
                    if let Some(x) = &e.response_excerpt {
                        let _ = writeln!(out, "    response: {}", x.replace('\n', " / "));
                    }
                }
            }
        }
    }
    out
}

fn verdict_word(vulnerable: bool) -> &'static str {
    if vulnerable {
        "vulnerable"
    } else {
        "clean"
    }
}
