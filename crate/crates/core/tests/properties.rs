mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use sastbench::findings::emit_findings;
use sastbench::split::{split_with, train_count};
use sastbench::{
    normalize_category, parse_response, score, verdict, CaseResult, Corpus, Finding, GroundTruth,
    ParseOutcome, TestCase, VulnCategory,
};
use sastbench::findings::CategoryToken;

/// Round half up of `permille * n / 1000` in integer arithmetic.
fn oracle_train(permille: u64, n: u64) -> u64 {
    (2 * permille * n + 1000) / 2000
}

fn corpus_from_counts(counts: &[(usize, usize)]) -> Corpus {
    let mut cases = Vec::new();
    for (c, &(vuln, clean)) in VulnCategory::ALL.iter().zip(counts) {
        for i in 0..vuln + clean {
            cases.push(TestCase {
                id: format!("{}{i:04}", c.code()),
                source_text: "x".into(),
                truth: GroundTruth {
                    category: *c,
                    is_vulnerable: i < vuln,
                    cwe: None,
                },
            });
        }
    }
    Corpus::from_cases(cases, "d").unwrap()
}

fn table_i_corpus() -> Corpus {
    let counts: Vec<(usize, usize)> = common::TABLE_I.iter().map(|&(_, v, c, _)| (v, c)).collect();
    corpus_from_counts(&counts)
}

#[test]
fn table_i_train_sizes_at_one_fifth() {
    let corpus = table_i_corpus();
    let split = split_with(&corpus, 0.2, 7, false).unwrap();
    let expected: BTreeMap<&str, usize> = [
        ("cmdi", 50), ("crypto", 49), ("hash", 47), ("ldapi", 12), ("pathtraver", 54),
        ("securecookie", 13), ("sqli", 101), ("trustbound", 25), ("weakrand", 99),
        ("xpathi", 7), ("xss", 91),
    ]
    .into_iter()
    .collect();
    for (c, _, _, total) in common::TABLE_I {
        let train = split.train.iter().filter(|id| corpus.get(id).unwrap().truth.category == c).count();
        assert_eq!(train as u64, oracle_train(200, total as u64), "{c:?}");
        assert_eq!(train, expected[c.code()], "{c:?}");
    }
}

#[test]
fn table_i_split_holds_over_100_seeds() {
    let corpus = table_i_corpus();
    let started = std::time::Instant::now();
    for seed in 0..100u64 {
        let seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let a = split_with(&corpus, 0.2, seed, false).unwrap();
        let b = split_with(&corpus, 0.2, seed, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len() + a.test.len(), corpus.len());
        let train: HashSet<&String> = a.train.iter().collect();
        assert!(a.test.iter().all(|t| !train.contains(t)));
    }
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

proptest! {
    #[test]
    fn split_partitions_and_stratifies(
        counts in prop::collection::vec((0usize..30, 0usize..30), 11),
        permille in 1u64..1000,
        seed in any::<u64>(),
        by_truth in any::<bool>(),
    ) {
        let corpus = corpus_from_counts(&counts);
        prop_assume!(!corpus.is_empty());
        let fraction = permille as f64 / 1000.0;
        let split = split_with(&corpus, fraction, seed, by_truth).unwrap();
        prop_assert_eq!(&split, &split_with(&corpus, fraction, seed, by_truth).unwrap());

        let train: HashSet<&str> = split.train.iter().map(String::as_str).collect();
        let test: HashSet<&str> = split.test.iter().map(String::as_str).collect();
        prop_assert!(train.is_disjoint(&test));
        let all: HashSet<&str> = corpus.ids().collect();
        prop_assert_eq!(train.union(&test).copied().collect::<HashSet<_>>(), all);

        for (c, &(vuln, clean)) in VulnCategory::ALL.iter().zip(&counts) {
            let in_train = |want: Option<bool>| {
                split.train.iter().filter(|id| {
                    let t = &corpus.get(id).unwrap().truth;
                    t.category == *c && want.map_or(true, |v| t.is_vulnerable == v)
                }).count() as u64
            };
            if by_truth {
                prop_assert_eq!(in_train(Some(true)), oracle_train(permille, vuln as u64));
                prop_assert_eq!(in_train(Some(false)), oracle_train(permille, clean as u64));
            } else {
                prop_assert_eq!(in_train(None), oracle_train(permille, (vuln + clean) as u64));
            }
        }
    }

    #[test]
    fn train_count_matches_integer_oracle(permille in 0u64..=1000, n in 0usize..100_000) {
        prop_assert_eq!(train_count(permille as f64 / 1000.0, n) as u64, oracle_train(permille, n as u64));
    }

    #[test]
    fn parser_is_total(raw in ".{0,400}") {
        let out = parse_response(&raw);
        let lines = raw.lines().count();
        prop_assert!(out.findings.len() + out.ignored_lines + out.none_lines <= lines);
    }

    #[test]
    fn emitted_findings_parse_back(
        raw in prop::collection::vec((0usize..11, 0u32..5000, "[A-Za-z0-9.;:()=+ ]{0,60}"), 0..12)
    ) {
        let findings: Vec<Finding> = raw
            .into_iter()
            .map(|(c, line, reason)| Finding {
                category: VulnCategory::ALL[c],
                line,
                reason: reason.trim().to_string(),
            })
            .collect();
        let parsed = parse_response(&emit_findings(&findings));
        prop_assert_eq!(parsed.findings, findings);
        prop_assert_eq!(parsed.ignored_lines, 0);
        prop_assert!(parsed.parse_notes.is_empty());
    }

    #[test]
    fn normalization_ignores_case_and_separators(c in 0usize..11, upper in any::<bool>(), sep in prop::sample::select(vec![" ", "_", "-", ""])) {
        let cat = VulnCategory::ALL[c];
        let name = cat.display_name().replace(' ', sep);
        let name = if upper { name.to_uppercase() } else { name.to_lowercase() };
        prop_assert_eq!(normalize_category(&name), Some(CategoryToken::Vuln(cat)));
        prop_assert_eq!(normalize_category(cat.code()), Some(CategoryToken::Vuln(cat)));
        let again = normalize_category(&format!("\"{}\"", cat.code().to_uppercase()));
        prop_assert_eq!(again, Some(CategoryToken::Vuln(cat)));
    }

    #[test]
    fn verdict_flags_iff_expected_category_reported(
        cats in prop::collection::vec(0usize..11, 0..6),
        expected in 0usize..11,
    ) {
        let outcome = ParseOutcome {
            findings: cats.iter().map(|&c| Finding { category: VulnCategory::ALL[c], line: 1, reason: String::new() }).collect(),
            ..Default::default()
        };
        let v = verdict(&outcome, VulnCategory::ALL[expected], "id");
        prop_assert_eq!(v.predicted_vulnerable, cats.contains(&expected));
        prop_assert_eq!(v.matched_findings.len() + v.off_category_findings.len(), cats.len());
    }
}

fn case_result(c: usize, truth: bool, predicted: bool, i: usize) -> CaseResult {
    let category = VulnCategory::ALL[c];
    let outcome = if predicted {
        parse_response(&format!("{},1,x", category.code()))
    } else {
        ParseOutcome::default()
    };
    CaseResult::new(
        GroundTruth { category, is_vulnerable: truth, cwe: None },
        verdict(&outcome, category, &i.to_string()),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn scoring_matches_brute_force_recount(
        raw in prop::collection::vec((0usize..11, any::<bool>(), any::<bool>()), 1..300)
    ) {
        let results: Vec<CaseResult> = raw.iter().enumerate().map(|(i, &(c, t, p))| case_result(c, t, p, i)).collect();
        let card = score(&results).unwrap();
        for (ci, cat) in VulnCategory::ALL.iter().enumerate() {
            let mine: Vec<_> = raw.iter().filter(|r| r.0 == ci).collect();
            match card.categories.get(cat) {
                None => prop_assert!(mine.is_empty()),
                Some(s) => {
                    let n = mine.len();
                    let right = mine.iter().filter(|r| r.1 == r.2).count();
                    prop_assert_eq!(s.accuracy, right as f64 / n as f64);
                    let k = s.counts.unwrap();
                    prop_assert_eq!(k.detected_vulnerable + k.rejected_clean + k.missed + k.false_flagged, n);
                    prop_assert_eq!(k.detected_vulnerable, mine.iter().filter(|r| r.1 && r.2).count());
                    prop_assert_eq!(k.false_flagged, mine.iter().filter(|r| !r.1 && r.2).count());
                }
            }
        }
        prop_assert_eq!(card.overall.n, raw.len());
        prop_assert_eq!(card.overall.correct, raw.iter().filter(|r| r.1 == r.2).count());
    }
}
