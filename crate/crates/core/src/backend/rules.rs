//! Line-regex rule engine.
//!
//! An offline baseline that answers in the same CSV shape as the model
//! backends. It matches textual patterns only and does no data-flow
//! analysis, so it cannot tell a tainted value from a constant.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{Analyzer, BackendError, CompletionRequest};
use crate::category::VulnCategory;

pub const NO_MATCH_LINE: &str = "none,0,No vulnerability pattern matched.";

struct Patterns {
    weak_random: Regex,
    weak_digest: Regex,
    weak_cipher: Regex,
    exec_call: Regex,
    string_literal: Regex,
    sql_concat: Regex,
    prepared: Regex,
    cookie_new: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        weak_random: Regex::new(r"\bjava\.util\.Random\b|\bnew\s+Random\s*\(|\bMath\.random\s*\(").unwrap(),
        weak_digest: Regex::new(r#"MessageDigest\s*\.\s*getInstance\s*\(\s*"(?i:md2|md4|md5|sha|sha1|sha-1)""#).unwrap(),
        weak_cipher: Regex::new(r#"Cipher\s*\.\s*getInstance\s*\(\s*"(?i:des/|desede/|rc2|rc4|blowfish)"#).unwrap(),
        exec_call: Regex::new(r"(?:\.exec|new\s+ProcessBuilder)\s*\((.*)\)\s*;").unwrap(),
        string_literal: Regex::new(r#"^\s*"(?:[^"\\]|\\.)*"\s*$"#).unwrap(),
        sql_concat: Regex::new(r#""[^"]*\b(?i:select|insert|update|delete)\b[^"]*"\s*\+|\+\s*"[^"]*\b(?i:where|from|values|set)\b[^"]*""#).unwrap(),
        prepared: Regex::new(r"\bprepare(?:Statement|Call)\s*\(").unwrap(),
        cookie_new: Regex::new(r"(\w+)\s*=\s*new\s+(?:[\w.]*\.)?Cookie\s*\(").unwrap(),
    })
}

/// Scans source text and returns findings in the `<code>,<line>,<reason>`
/// format, or a single `none,0,...` line when nothing matches.
pub fn rule_engine_analyze(source_text: &str) -> String {
    let p = patterns();
    let uses_prepared = p.prepared.is_match(source_text);
    let mut hits: BTreeSet<(usize, VulnCategory, &'static str)> = BTreeSet::new();

    for (idx, line) in source_text.lines().enumerate() {
        let lineno = idx + 1;
        let code = line.trim_start();
        if code.starts_with("//") || code.starts_with('*') || code.starts_with("/*") {
            continue;
        }
        if p.weak_random.is_match(line) {
            hits.insert((lineno, VulnCategory::Weakrand, "java.util.Random or Math.random is not a cryptographically secure generator."));
        }
        if p.weak_digest.is_match(line) {
            hits.insert((lineno, VulnCategory::Hash, "MD5 or SHA1 message digest is a weak hashing algorithm."));
        }
        if p.weak_cipher.is_match(line) {
            hits.insert((lineno, VulnCategory::Crypto, "DES-family or RC cipher is a weak cryptographic algorithm."));
        }
        if let Some(cap) = p.exec_call.captures(line) {
            if !p.string_literal.is_match(&cap[1]) {
                hits.insert((lineno, VulnCategory::Cmdi, "Process execution with a non-constant argument."));
            }
        }
        if !uses_prepared && p.sql_concat.is_match(line) {
            hits.insert((lineno, VulnCategory::Sqli, "SQL query built by string concatenation without a prepared statement."));
        }
        if let Some(cap) = p.cookie_new.captures(line) {
            let secured = format!("{}.setSecure(true)", &cap[1]);
            if !source_text.contains(&secured) {
                hits.insert((lineno, VulnCategory::Securecookie, "Cookie is never marked secure."));
            }
        }
    }

    if hits.is_empty() {
        return NO_MATCH_LINE.to_string();
    }
    hits.into_iter()
        .map(|(line, category, reason)| format!("{},{line},{reason}", category.code()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Analyzer wrapper. Scans the request's source text when present and the
/// prompt otherwise.
pub struct RuleEngine;

impl Analyzer for RuleEngine {
    fn exchange(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let text = request.source_text.as_deref().unwrap_or(&request.prompt);
        Ok(rule_engine_analyze(text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::findings::parse_response;

    fn numbered(lines: &[(usize, &str)], total: usize) -> String {
        (1..=total)
            .map(|n| lines.iter().find(|(l, _)| *l == n).map(|(_, t)| *t).unwrap_or("int x = 0;"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn java_util_random_on_line_seven() {
        let src = numbered(&[(7, "int r = new java.util.Random().nextInt();")], 9);
        let out = rule_engine_analyze(&src);
        assert!(out.starts_with("weakrand,7,"), "{out}");
    }

    #[test]
    fn clean_source_reports_none() {
        assert_eq!(rule_engine_analyze("class A { }"), NO_MATCH_LINE);
        let out = parse_response(NO_MATCH_LINE);
        assert!(out.findings.is_empty());
        assert_eq!(out.none_lines, 1);
    }

    #[test]
    fn md5_digest_on_line_51() {
        let src = numbered(&[(51, r#"java.security.MessageDigest md = java.security.MessageDigest.getInstance("MD5");"#)], 60);
        assert!(rule_engine_analyze(&src).starts_with("hash,51,"));
        let strong = numbered(&[(51, r#"MessageDigest md = MessageDigest.getInstance("SHA-256");"#)], 60);
        assert_eq!(rule_engine_analyze(&strong), NO_MATCH_LINE);
    }

    #[test]
    fn cipher_rules() {
        assert!(rule_engine_analyze(r#"Cipher c = Cipher.getInstance("DES/CBC/PKCS5Padding");"#).starts_with("crypto,1,"));
        assert_eq!(rule_engine_analyze(r#"Cipher c = Cipher.getInstance("AES/GCM/NOPADDING");"#), NO_MATCH_LINE);
    }

    #[test]
    fn secure_random_is_not_weak() {
        let src = r#"java.security.SecureRandom r = java.security.SecureRandom.getInstance("SHA1PRNG");"#;
        assert_eq!(rule_engine_analyze(src), NO_MATCH_LINE);
    }

    #[test]
    fn exec_with_literal_is_ignored() {
        assert_eq!(rule_engine_analyze(r#"Runtime.getRuntime().exec("ls -l");"#), NO_MATCH_LINE);
        assert!(rule_engine_analyze(r#"Runtime.getRuntime().exec("echo " + bar);"#).starts_with("cmdi,1,"));
        assert!(rule_engine_analyze("new ProcessBuilder(args);").starts_with("cmdi,1,"));
    }

    #[test]
    fn sql_concatenation_without_prepared_statement() {
        let src = "String sql = \"SELECT * FROM users WHERE name='\" + bar + \"'\";\nstatement.execute(sql);";
        assert!(rule_engine_analyze(src).starts_with("sqli,1,"));
        let prepared = format!("{src}\nconn.prepareStatement(sql);");
        assert_eq!(rule_engine_analyze(&prepared), NO_MATCH_LINE);
    }

    #[test]
    fn cookie_without_secure_flag() {
        let src = "Cookie c = new javax.servlet.http.Cookie(\"k\", v);\nc.setSecure(false);";
        assert!(rule_engine_analyze(src).starts_with("securecookie,1,"));
        let ok = "Cookie c = new Cookie(\"k\", v);\nc.setSecure(true);";
        assert_eq!(rule_engine_analyze(ok), NO_MATCH_LINE);
    }

    #[test]
    fn deterministic_and_parseable() {
        let src = "Random r = new Random();\nMessageDigest.getInstance(\"SHA1\");\n// new Random()";
        let a = rule_engine_analyze(src);
        assert_eq!(a, rule_engine_analyze(src));
        let parsed = parse_response(&a);
        assert_eq!(parsed.findings.len(), 2);
        assert_eq!(parsed.ignored_lines, 0);
        assert_eq!(parsed.findings[0].category, VulnCategory::Weakrand);
        assert_eq!(parsed.findings[1].line, 2);
    }
}
