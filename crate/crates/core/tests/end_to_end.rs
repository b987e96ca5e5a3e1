mod common;

use std::sync::Arc;

use sastbench::backend::{BackendOptions, MockScript, ResponseCache, RetryPolicy};
use sastbench::{run_experiment, stratified_split, ExperimentConfig, PromptLibrary, PromptMode, Subset};

fn options(cache: Option<&std::path::Path>) -> BackendOptions {
    BackendOptions {
        retry: RetryPolicy::none(),
        cache: cache.map(|d| Arc::new(ResponseCache::open(d).unwrap())),
        ..Default::default()
    }
}

#[test]
fn oracle_mock_scores_perfectly_and_deterministically() {
    let corpus = common::mini_corpus();
    let split = stratified_split(&corpus, 0.2, 5).unwrap();
    let lib = PromptLibrary::builtin();
    let script = MockScript::oracle(&corpus);
    let descriptor = sastbench::backend::BackendDescriptor::mock_replay();

    let mut config = ExperimentConfig::new(descriptor, PromptMode::AugmentedExpectedCategory, Subset::Test);
    let serial = run_experiment(&config, &corpus, Some(&split), &lib, &common::mock_backend(script.clone(), options(None))).unwrap();
    config.parallelism = 8;
    let parallel = run_experiment(&config, &corpus, Some(&split), &lib, &common::mock_backend(script, options(None))).unwrap();

    assert_eq!(serial.results.len(), 44);
    assert_eq!(serial.scores, parallel.scores);
    assert_eq!(serial.results, parallel.results);
    assert_eq!(serial.scores.overall.accuracy, 1.0);
    assert_eq!(serial.split.as_ref().unwrap().digest, split.digest());
    assert_eq!(serial.prompt_digests.len(), 12);
}

#[test]
fn warm_cache_rerun_makes_no_calls() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::mini_corpus();
    let lib = PromptLibrary::builtin();
    let script = MockScript::oracle(&corpus);
    let mut config = ExperimentConfig::new(sastbench::backend::BackendDescriptor::mock_replay(), PromptMode::Base, Subset::All);
    config.parallelism = 4;
    let cold_backend = common::mock_backend(script.clone(), options(Some(dir.path())));
    let cold = run_experiment(&config, &corpus, None, &lib, &cold_backend).unwrap();
    assert_eq!(cold.exchanges, 55);
    let warm_backend = common::mock_backend(MockScript::default(), options(Some(dir.path())));
    let warm = run_experiment(&config, &corpus, None, &lib, &warm_backend).unwrap();
    assert_eq!(warm.exchanges, 0);
    assert_eq!(warm.cache_hits, 55);
    assert_eq!(warm.scores, cold.scores);
    assert!(warm.results.iter().all(|r| r.from_cache));
}

#[test]
fn unscripted_cases_are_counted_as_failures() {
    let corpus = common::mini_corpus();
    let mut script = MockScript::oracle(&corpus);
    script.by_case.remove("BenchmarkTest00001");
    script.by_case.remove("BenchmarkTest00012");
    let config = ExperimentConfig::new(sastbench::backend::BackendDescriptor::mock_replay(), PromptMode::Base, Subset::All);
    let run = run_experiment(&config, &corpus, None, &PromptLibrary::builtin(), &common::mock_backend(script, options(None))).unwrap();
    assert_eq!(run.failure_counts.get("empty_response"), Some(&2));
    let failed: Vec<_> = run.results.iter().filter(|r| r.failure.is_some()).collect();
    assert!(failed.iter().all(|r| !r.verdict.predicted_vulnerable));
}
