mod common;

use sastbench::findings::emit_findings;
use sastbench::parse_response;

fn fixtures() -> Vec<(String, String, String)> {
    let dir = common::crate_dir().join("tests/fixtures/responses");
    let mut names: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|p| {
            let raw = std::fs::read_to_string(&p).unwrap();
            let expected = std::fs::read_to_string(p.with_extension("expected")).unwrap();
            (p.file_stem().unwrap().to_string_lossy().into_owned(), raw, expected)
        })
        .collect()
}

#[test]
fn fixture_corpus_is_large_enough() {
    assert!(fixtures().len() >= 12);
}

#[test]
fn every_fixture_parses_to_expected_findings() {
    for (name, raw, expected) in fixtures() {
        let out = parse_response(&raw);
        let mut got = emit_findings(&out.findings);
        if !got.is_empty() {
            got.push('\n');
        }
        assert_eq!(got, expected, "{name}");
    }
}

#[test]
fn notes_explain_skipped_content() {
    let fx = fixtures();
    let get = |n: &str| fx.iter().find(|f| f.0 == n).unwrap().1.clone();
    let header = parse_response(&get("03-header-prefixed"));
    assert!(header.parse_notes.iter().any(|n| n.contains("header")));
    let none = parse_response(&get("07-bare-none"));
    assert_eq!(none.none_lines, 1);
    let row = parse_response(&get("06-none-row"));
    assert_eq!(row.none_lines, 1);
    let missing = parse_response(&get("15-missing-line"));
    assert!(missing.parse_notes.iter().any(|n| n.contains("no line number")));
}
