//! Parsing analyzer output into findings, and per-case verdicts.
//!
//! Analyzers are asked to answer with one `<category>,<line>,<reason>`
//! line per vulnerability. Models wrap that in code fences, add headers or
//! chat around it, so parsing is total: every input yields an outcome and
//! lines that cannot be read are counted rather than rejected.

use serde::{Deserialize, Serialize};

use crate::category::VulnCategory;

/// A normalized category token: one of the eleven codes, or the explicit
/// "nothing found" marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryToken {
    Vuln(VulnCategory),
    NoneMarker,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub category: VulnCategory,
    /// 1-based line in the analyzed source; 0 when the analyzer gave none.
    pub line: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub findings: Vec<Finding>,
    pub ignored_lines: usize,
    /// Lines that explicitly reported no vulnerability.
    pub none_lines: usize,
    pub parse_notes: Vec<String>,
}

const ALIASES: &[(&str, VulnCategory)] = &[
    ("commandinjection", VulnCategory::Cmdi),
    ("commandlineinjection", VulnCategory::Cmdi),
    ("oscommandinjection", VulnCategory::Cmdi),
    ("cmdinjection", VulnCategory::Cmdi),
    ("weakcrypto", VulnCategory::Crypto),
    ("weakcryptography", VulnCategory::Crypto),
    ("weakcipher", VulnCategory::Crypto),
    ("weakhash", VulnCategory::Hash),
    ("weakhashing", VulnCategory::Hash),
    ("ldapinjection", VulnCategory::Ldapi),
    ("ldap", VulnCategory::Ldapi),
    ("pathtraversal", VulnCategory::Pathtraver),
    ("directorytraversal", VulnCategory::Pathtraver),
    ("securecookieflag", VulnCategory::Securecookie),
    ("insecurecookie", VulnCategory::Securecookie),
    ("sqlinjection", VulnCategory::Sqli),
    ("trustboundary", VulnCategory::Trustbound),
    ("trustboundaryviolation", VulnCategory::Trustbound),
    ("weakrandom", VulnCategory::Weakrand),
    ("weakrandomness", VulnCategory::Weakrand),
    ("insecurerandomness", VulnCategory::Weakrand),
    ("xpath", VulnCategory::Xpathi),
    ("xpathinjection", VulnCategory::Xpathi),
    ("crosssitescripting", VulnCategory::Xss),
];

const NONE_TOKENS: &[&str] = &[
    "none",
    "nonefound",
    "novulnerability",
    "novulnerabilities",
    "novuln",
    "n/a",
    "na",
];

const HEADER_TOKENS: &[&str] = &[
    "category",
    "type",
    "vulnerability",
    "vulnerabilitytype",
    "vuln",
    "vulntype",
    "vulnerabilitycategory",
];

fn squash(token: &str) -> String {
    token
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '*')
        .trim()
        .chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-' | '\t'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Maps a raw category token to a canonical code, the none-marker, or
/// `None` when the token is not recognized.
///
/// Matching ignores case, surrounding quotes and separators, and accepts
/// long names (`SQL Injection`), common aliases (`weakhash`) and CWE ids
/// (`CWE-89`).
pub fn normalize_category(token: &str) -> Option<CategoryToken> {
    let key = squash(token);
    if key.is_empty() {
        return None;
    }
    if NONE_TOKENS.contains(&key.as_str()) {
        return Some(CategoryToken::NoneMarker);
    }
    if let Some(c) = VulnCategory::from_code(&key) {
        return Some(CategoryToken::Vuln(c));
    }
    if let Some(&(_, c)) = ALIASES.iter().find(|(alias, _)| *alias == key) {
        return Some(CategoryToken::Vuln(c));
    }
    if let Some(num) = key.strip_prefix("cwe") {
        if let Ok(n) = num.parse::<u32>() {
            return VulnCategory::ALL
                .into_iter()
                .find(|c| c.cwe() == n)
                .map(CategoryToken::Vuln);
        }
    }
    None
}

fn strip_list_marker(line: &str) -> &str {
    for marker in ["- ", "* ", "+ ", "\u{2022} "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return rest.trim_start();
        }
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return rest.trim_start();
        }
    }
    line
}

fn parse_line_number(token: &str) -> Option<u32> {
    let token = token.trim().trim_matches(|c: char| c == '"' || c == '\'');
    if let Ok(n) = token.parse::<u32>() {
        return Some(n);
    }
    let start = token.find(|c: char| c.is_ascii_digit())?;
    let digits: String = token[start..]
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok()
}

fn unquote(reason: &str) -> &str {
    let r = reason.trim();
    if r.len() >= 2 && r.starts_with('"') && r.ends_with('"') {
        &r[1..r.len() - 1]
    } else {
        r
    }
}

fn clip(s: &str) -> String {
    const MAX: usize = 40;
    if s.chars().count() <= MAX {
        s.to_string()
    } else {
        let head: String = s.chars().take(MAX).collect();
        format!("{head}...")
    }
}

pub fn parse_response(raw: &str) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    for (idx, raw_line) in raw.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim().trim_start_matches('\u{feff}').trim();
        if line.is_empty() || line.starts_with("```") || line.starts_with("~~~") {
            out.ignored_lines += 1;
            continue;
        }
        let mut line = strip_list_marker(line);
        if line.len() >= 2 && line.starts_with('`') && line.ends_with('`') {
            line = line.trim_matches('`').trim();
        }

        let parts: Vec<&str> = line.splitn(3, ',').collect();
        if parts.len() < 2 {
            // a bare "none" still counts as an explicit answer
            if normalize_category(line) == Some(CategoryToken::NoneMarker) {
                out.none_lines += 1;
            } else {
                out.ignored_lines += 1;
            }
            continue;
        }

        if HEADER_TOKENS.contains(&squash(parts[0]).as_str()) {
            out.ignored_lines += 1;
            out.parse_notes.push(format!("line {lineno}: skipped header"));
            continue;
        }
        match normalize_category(parts[0]) {
            Some(CategoryToken::NoneMarker) => out.none_lines += 1,
            Some(CategoryToken::Vuln(category)) => {
                let line_no = parse_line_number(parts[1]).unwrap_or_else(|| {
                    out.parse_notes.push(format!(
                        "line {lineno}: no line number in `{}`",
                        clip(parts[1].trim())
                    ));
                    0
                });
                out.findings.push(Finding {
                    category,
                    line: line_no,
                    reason: parts.get(2).map(|r| unquote(r)).unwrap_or("").to_string(),
                });
            }
            None => {
                out.ignored_lines += 1;
                out.parse_notes.push(format!(
                    "line {lineno}: unknown category `{}`",
                    clip(parts[0].trim())
                ));
            }
        }
    }
    out
}

/// Canonical emission: one `<code>,<line>,<reason>` line per finding.
pub fn emit_findings(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(|f| format!("{},{},{}", f.category.code(), f.line, f.reason))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub case_id: String,
    pub expected_category: VulnCategory,
    pub predicted_vulnerable: bool,
    /// Findings in the expected category.
    pub matched_findings: Vec<Finding>,
    /// Findings in other categories. Kept for triage; never affect the verdict.
    pub off_category_findings: Vec<Finding>,
}

/// Optional strict check: an expected-category finding only counts when its
/// line is within `tolerance` of the known sink line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCheck {
    pub expected_line: u32,
    pub tolerance: u32,
}

/// A case is predicted vulnerable iff some finding names its expected
/// category. Line numbers are not consulted.
pub fn verdict(outcome: &ParseOutcome, expected: VulnCategory, case_id: &str) -> Verdict {
    verdict_with_lines(outcome, expected, case_id, None)
}

pub fn verdict_with_lines(
    outcome: &ParseOutcome,
    expected: VulnCategory,
    case_id: &str,
    line_check: Option<LineCheck>,
) -> Verdict {
    let (matched, off): (Vec<Finding>, Vec<Finding>) = outcome
        .findings
        .iter()
        .cloned()
        .partition(|f| f.category == expected);
    let matched: Vec<Finding> = match line_check {
        None => matched,
        Some(check) => matched
            .into_iter()
            .filter(|f| f.line.abs_diff(check.expected_line) <= check.tolerance)
            .collect(),
    };
    Verdict {
        case_id: case_id.to_string(),
        expected_category: expected,
        predicted_vulnerable: !matched.is_empty(),
        matched_findings: matched,
        off_category_findings: off,
    }
}
