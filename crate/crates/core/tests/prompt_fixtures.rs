use std::path::Path;

use sastbench::{load_corpus, PromptLibrary, PromptMode};

fn mini() -> sastbench::Corpus {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini");
    load_corpus(&root.join("testcode"), &root.join("expectedresults-mini.csv")).unwrap()
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prompts").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const CASES: &[&str] = &[
    "BenchmarkTest00001",
    "BenchmarkTest00002",
    "BenchmarkTest00003",
    "BenchmarkTest00007",
    "BenchmarkTest00009",
    "BenchmarkTest00011",
    "BenchmarkTest00020",
];

#[test]
fn base_prompts_are_byte_exact() {
    let corpus = mini();
    let lib = PromptLibrary::builtin();
    for id in CASES {
        let case = corpus.get(id).unwrap();
        assert_eq!(lib.assemble(case, PromptMode::Base), fixture(&format!("{id}.base.txt")), "{id}");
    }
}

#[test]
fn augmented_prompts_are_byte_exact() {
    let corpus = mini();
    let lib = PromptLibrary::builtin();
    for id in CASES {
        let case = corpus.get(id).unwrap();
        assert_eq!(
            lib.assemble(case, PromptMode::AugmentedExpectedCategory),
            fixture(&format!("{id}.augmented.txt")),
            "{id}"
        );
    }
}

#[test]
fn prompt_directory_round_trips() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts");
    let from_disk = PromptLibrary::load_dir(&dir).unwrap();
    assert_eq!(from_disk, PromptLibrary::builtin());
}

#[test]
fn augment_all_contains_every_category_once() {
    let corpus = mini();
    let lib = PromptLibrary::builtin();
    let case = corpus.get("BenchmarkTest00001").unwrap();
    let all = lib.assemble(case, PromptMode::AugmentedAll);
    let base = lib.assemble(case, PromptMode::Base);
    assert!(all.starts_with(&base));
    for c in sastbench::VulnCategory::ALL {
        assert_eq!(all.matches(lib.augmentation(c).text.as_str()).count(), 1, "{c:?}");
    }
}
