#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sastbench::backend::{Backend, BackendDescriptor, BackendOptions, MockReplay, MockScript, RetryPolicy};
use sastbench::{
    load_corpus, run_experiment, Corpus, ExperimentConfig, GroundTruth, PromptLibrary, PromptMode,
    RunRecord, Subset, TestCase, VulnCategory,
};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn mini_root() -> PathBuf {
    crate_dir().join("fixtures/mini")
}

pub fn mini_corpus() -> Corpus {
    let root = mini_root();
    load_corpus(&root.join("testcode"), &root.join("expectedresults-mini.csv")).unwrap()
}

/// Hand-counted (vulnerable, clean) per category for the miniature corpus.
pub const MINI_COUNTS: [(VulnCategory, usize, usize); 11] = [
    (VulnCategory::Cmdi, 3, 2),
    (VulnCategory::Crypto, 3, 2),
    (VulnCategory::Hash, 2, 3),
    (VulnCategory::Ldapi, 2, 3),
    (VulnCategory::Pathtraver, 3, 2),
    (VulnCategory::Securecookie, 2, 3),
    (VulnCategory::Sqli, 3, 2),
    (VulnCategory::Trustbound, 3, 2),
    (VulnCategory::Weakrand, 2, 3),
    (VulnCategory::Xpathi, 2, 3),
    (VulnCategory::Xss, 3, 2),
];

/// Benchmark v1.2 distribution: (category, vulnerable, not vulnerable, total).
pub const TABLE_I: [(VulnCategory, usize, usize, usize); 11] = [
    (VulnCategory::Cmdi, 126, 125, 251),
    (VulnCategory::Crypto, 130, 116, 246),
    (VulnCategory::Hash, 129, 107, 236),
    (VulnCategory::Ldapi, 27, 32, 59),
    (VulnCategory::Pathtraver, 133, 135, 268),
    (VulnCategory::Securecookie, 36, 31, 67),
    (VulnCategory::Sqli, 272, 232, 504),
    (VulnCategory::Trustbound, 83, 43, 126),
    (VulnCategory::Weakrand, 218, 275, 493),
    (VulnCategory::Xpathi, 15, 20, 35),
    (VulnCategory::Xss, 246, 209, 455),
];

/// Writes a corpus with the given per-category counts to `dir` in the
/// benchmark's on-disk layout and returns (source root, manifest path).
pub fn write_corpus(dir: &Path, counts: &[(VulnCategory, usize, usize)]) -> (PathBuf, PathBuf) {
    let src = dir.join("testcode");
    std::fs::create_dir_all(&src).unwrap();
    let mut manifest = String::from("# test name, category, real vulnerability, cwe\n");
    let mut n = 0;
    for &(category, vuln, clean) in counts {
        for i in 0..vuln + clean {
            n += 1;
            let id = format!("BenchmarkTest{n:05}");
            let truth = i < vuln;
            manifest.push_str(&format!("{id},{},{truth},{}\n", category.code(), category.cwe()));
            std::fs::write(
                src.join(format!("{id}.java")),
                format!("package t;\n\npublic class {id} {{\n    // {}\n}}\n", category.code()),
            )
            .unwrap();
        }
    }
    let manifest_path = dir.join("expectedresults.csv");
    std::fs::write(&manifest_path, manifest).unwrap();
    (src, manifest_path)
}

/// Per-category percentages from a `category,base,augmented` fixture.
pub fn read_mode_percents(path: &Path) -> Vec<(VulnCategory, f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("category") && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

pub const CASES_PER_CATEGORY: usize = 1000;

/// A run whose per-category accuracy equals `percents` exactly: each
/// category gets 1000 vulnerable cases and the mock flags the first
/// `round(10 * percent)` of them.
pub fn run_with_accuracy(
    backend_name: &str,
    mode: PromptMode,
    percents: &[(VulnCategory, f64)],
) -> RunRecord {
    let mut cases = Vec::new();
    let mut script = MockScript::default();
    for &(category, pct) in percents {
        let hits = (pct * 10.0).round() as usize;
        for i in 0..CASES_PER_CATEGORY {
            let id = format!("{}-{i:04}", category.code());
            let answer = if i < hits {
                format!("{},1,flagged", category.code())
            } else {
                "none,0,clean".to_string()
            };
            script.by_case.insert(id.clone(), answer);
            cases.push(TestCase {
                id,
                source_text: format!("class C{i} {{}}\n"),
                truth: GroundTruth {
                    category,
                    is_vulnerable: true,
                    cwe: None,
                },
            });
        }
    }
    let corpus = Corpus::from_cases(cases, "synthetic").unwrap();
    let mut descriptor = BackendDescriptor::mock_replay();
    descriptor.shorthand = backend_name.to_string();
    let backend = Backend::new(
        descriptor.clone(),
        Box::new(MockReplay::new(script)),
        BackendOptions {
            retry: RetryPolicy::none(),
            ..Default::default()
        },
    );
    let mut config = ExperimentConfig::new(descriptor, mode, Subset::All);
    config.parallelism = 8;
    run_experiment(&config, &corpus, None, &PromptLibrary::builtin(), &backend).unwrap()
}

pub fn mock_backend(script: MockScript, options: BackendOptions) -> Backend {
    Backend::new(BackendDescriptor::mock_replay(), Box::new(MockReplay::new(script)), options)
}
