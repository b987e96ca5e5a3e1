use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{score, CaseResult, EvalError, Scorecard};
use crate::backend::{Backend, BackendDescriptor, BackendError, CompletionRequest, RateLimit, RetryPolicy};
use crate::corpus::{Corpus, TestCase};
use crate::findings::{parse_response, verdict_with_lines, LineCheck, ParseOutcome};
use crate::prompt::{PromptLibrary, PromptMode};
use crate::split::{CorpusSplit, Subset};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub backend: BackendDescriptor,
    pub mode: PromptMode,
    pub subset: Subset,
    /// Number of cases in flight at once; at least 1.
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub run_label: String,
    pub max_wait: Duration,
    /// Known sink line per case id, used only when `line_tolerance` is set.
    pub line_hints: BTreeMap<String, u32>,
    pub line_tolerance: Option<u32>,
}

impl ExperimentConfig {
    pub fn new(backend: BackendDescriptor, mode: PromptMode, subset: Subset) -> Self {
        let run_label = format!("{}-{}-{}", backend.slug(), mode.flag(), subset.label());
        ExperimentConfig {
            backend,
            mode,
            subset,
            parallelism: 1,
            cache_dir: None,
            run_label,
            max_wait: Duration::from_secs(300),
            line_hints: BTreeMap::new(),
            line_tolerance: None,
        }
    }

    fn line_check(&self, case_id: &str) -> Option<LineCheck> {
        let tolerance = self.line_tolerance?;
        self.line_hints.get(case_id).map(|&expected_line| LineCheck {
            expected_line,
            tolerance,
        })
    }
}

/// The configuration as recorded in a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub backend: BackendDescriptor,
    pub mode: PromptMode,
    pub subset: Subset,
    pub parallelism: usize,
    pub cache_enabled: bool,
    pub max_wait_secs: f64,
    pub retry: RetryPolicy,
    pub rate_limit: Option<RateLimit>,
    /// Decoding parameters sent to the model.
    pub decoding: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_tolerance: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub fraction: f64,
    pub seed: u64,
    pub by_truth: bool,
    pub digest: String,
}

impl SplitInfo {
    pub fn of(split: &CorpusSplit) -> Self {
        SplitInfo {
            fraction: split.fraction,
            seed: split.seed,
            by_truth: split.by_truth,
            digest: split.digest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_label: String,
    pub config: ConfigSnapshot,
    pub corpus_manifest_digest: String,
    pub split: Option<SplitInfo>,
    pub prompt_digests: BTreeMap<String, String>,
    pub started_unix_ms: u64,
    pub duration_ms: u64,
    /// Analyzer calls made during the run; cache hits are not calls.
    pub exchanges: u64,
    pub cache_hits: u64,
    /// Failed cases per error tag.
    pub failure_counts: BTreeMap<String, usize>,
    pub results: Vec<CaseResult>,
    pub scores: Scorecard,
}

impl RunRecord {
    pub fn backend(&self) -> &str {
        &self.config.backend.shorthand
    }

    pub fn mode(&self) -> PromptMode {
        self.config.mode
    }

    /// Subset name plus split digest; runs are comparable only when equal.
    pub fn subset_key(&self) -> (Subset, Option<&str>) {
        let digest = match self.config.subset {
            Subset::All => None,
            _ => self.split.as_ref().map(|s| s.digest.as_str()),
        };
        (self.config.subset, digest)
    }

    pub fn rescore(&self) -> Result<Scorecard, EvalError> {
        score(&self.results)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run record serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json()).map_err(|e| file_error(path, e))
    }

    pub fn load(path: &Path) -> Result<RunRecord, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
        let record: RunRecord = serde_json::from_str(&text).map_err(|e| file_error(path, e))?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(EvalError::File {
                path: path.display().to_string(),
                reason: format!("unsupported schema version {}", record.schema_version),
            });
        }
        Ok(record)
    }
}

fn file_error(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::File {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn decoding_label(descriptor: &BackendDescriptor) -> String {
    if !descriptor.api_kind.is_remote() {
        return "not applicable".into();
    }
    match descriptor.temperature {
        Some(t) => format!("temperature={t}"),
        None => "provider defaults".into(),
    }
}

/// Runs every case of the chosen subset through the backend and scores the
/// results. Per-case backend failures are recorded on the case and scored
/// as predicted clean; only authentication and configuration errors stop
/// the run.
///
/// Results come back in corpus order whatever the parallelism, so a run
/// at `parallelism = 8` scores the same as one at 1.
pub fn run_experiment(
    config: &ExperimentConfig,
    corpus: &Corpus,
    split: Option<&CorpusSplit>,
    library: &PromptLibrary,
    backend: &Backend,
) -> Result<RunRecord, EvalError> {
    if config.parallelism == 0 {
        return Err(EvalError::Config("parallelism must be at least 1".into()));
    }
    if let Some(split) = split {
        split
            .check_corpus(corpus)
            .map_err(|e| EvalError::Config(e.to_string()))?;
    }
    let cases: Vec<&TestCase> = match (config.subset, split) {
        (Subset::All, _) => corpus.cases().iter().collect(),
        (subset, Some(split)) => {
            let ids = split.ids(subset);
            let mut cases = Vec::with_capacity(ids.len());
            for id in ids {
                let case = corpus.get(id).ok_or_else(|| {
                    EvalError::Config(format!("split names {id}, which is not in the corpus"))
                })?;
                cases.push(case);
            }
            cases
        }
        (subset, None) => {
            return Err(EvalError::Config(format!("subset `{subset}` needs a split file")));
        }
    };
    if cases.is_empty() {
        return Err(EvalError::EmptyResults);
    }

    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let started = Instant::now();
    let exchanges_before = backend.exchange_count();
    let hits_before = backend.cache_hit_count();

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let fatal: Mutex<Option<BackendError>> = Mutex::new(None);
    let done: Mutex<BTreeMap<usize, CaseResult>> = Mutex::new(BTreeMap::new());
    let workers = config.parallelism.min(cases.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let idx = next.fetch_add(1, Ordering::SeqCst);
                let Some(case) = cases.get(idx) else { break };
                match evaluate_case(config, library, backend, case) {
                    Ok(result) => {
                        done.lock().unwrap().insert(idx, result);
                    }
                    Err(err) => {
                        stop.store(true, Ordering::SeqCst);
                        fatal.lock().unwrap().get_or_insert(err);
                    }
                }
            });
        }
    });

    if let Some(err) = fatal.into_inner().unwrap() {
        return Err(EvalError::Backend(err));
    }
    let results: Vec<CaseResult> = done.into_inner().unwrap().into_values().collect();
    let mut failure_counts = BTreeMap::new();
    for r in &results {
        if let Some(tag) = &r.failure {
            *failure_counts.entry(tag.clone()).or_insert(0) += 1;
        }
    }
    let scores = score(&results)?;
    let options = backend.options();
    Ok(RunRecord {
        schema_version: SCHEMA_VERSION,
        run_label: config.run_label.clone(),
        config: ConfigSnapshot {
            backend: config.backend.clone(),
            mode: config.mode,
            subset: config.subset,
            parallelism: config.parallelism,
            cache_enabled: options.cache.is_some(),
            max_wait_secs: config.max_wait.as_secs_f64(),
            retry: options.retry,
            rate_limit: options.rate_limit,
            decoding: decoding_label(&config.backend),
            line_tolerance: config.line_tolerance,
        },
        corpus_manifest_digest: corpus.manifest_digest().to_string(),
        split: split.map(SplitInfo::of),
        prompt_digests: library.digests(),
        started_unix_ms,
        duration_ms: started.elapsed().as_millis() as u64,
        exchanges: backend.exchange_count() - exchanges_before,
        cache_hits: backend.cache_hit_count() - hits_before,
        failure_counts,
        results,
        scores,
    })
}

fn evaluate_case(
    config: &ExperimentConfig,
    library: &PromptLibrary,
    backend: &Backend,
    case: &TestCase,
) -> Result<CaseResult, BackendError> {
    let prompt = library.assemble(case, config.mode);
    let mut request = CompletionRequest::new(&case.id, prompt);
    request.max_wait = config.max_wait;
    request.source_text = Some(case.source_text.clone());
    let category = case.truth.category;
    let line_check = config.line_check(&case.id);

    match backend.complete(&request) {
        Ok(raw) => {
            let outcome = parse_response(&raw.text);
            let verdict = verdict_with_lines(&outcome, category, &case.id, line_check);
            let mut result = CaseResult::new(case.truth.clone(), verdict);
            result.raw_ref = Some(raw.cache_key);
            result.raw_response = Some(raw.text);
            result.from_cache = raw.from_cache;
            Ok(result)
        }
        Err(err) if err.is_fatal() => Err(err),
        Err(err) => {
            log::warn!("{}: {err}", case.id);
            let verdict = verdict_with_lines(&ParseOutcome::default(), category, &case.id, None);
            let mut result = CaseResult::new(case.truth.clone(), verdict);
            result.raw_ref = Some(backend.cache_key(&request.prompt));
            result.failure = Some(err.tag().to_string());
            result.failure_detail = Some(err.to_string());
            Ok(result)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Analyzer, ApiKind, BackendOptions, Provider, ResponseCache};
    use crate::category::VulnCategory;
    use crate::corpus::GroundTruth;
    use crate::split::stratified_split;
    use std::sync::Arc;

    fn corpus() -> Corpus {
        let cases = VulnCategory::ALL
            .iter()
            .flat_map(|&category| {
                (0..6).map(move |i| TestCase {
                    id: format!("{}-{i}", category.code()),
                    source_text: format!("class T{i} {{}} // {}\n", category.code()),
                    truth: GroundTruth {
                        category,
                        is_vulnerable: i % 2 == 0,
                        cwe: None,
                    },
                })
            })
            .collect();
        Corpus::from_cases(cases, "digest").unwrap()
    }

    /// Flags every case whose source mentions an even index.
    struct EvenFlagger;

    impl Analyzer for EvenFlagger {
        fn exchange(&self, request: &CompletionRequest) -> Result<String, BackendError> {
            let src = request.source_text.as_deref().unwrap_or_default();
            let id = &request.case_id;
            let code = id.split('-').next().unwrap();
            if id.ends_with("-5") {
                return Err(BackendError::Api {
                    status: 400,
                    message: "bad request".into(),
                });
            }
            if ["T0", "T2", "T4", "T3"].iter().any(|t| src.contains(t)) {
                Ok(format!("{code},1,flagged"))
            } else {
                Ok("none,0,clean".into())
            }
        }
    }

    struct Unauthorized;

    impl Analyzer for Unauthorized {
        fn exchange(&self, _: &CompletionRequest) -> Result<String, BackendError> {
            Err(BackendError::AuthFailure("bad key".into()))
        }
    }

    fn descriptor() -> BackendDescriptor {
        BackendDescriptor::new("Even", "even", ApiKind::RuleEngine, Provider::Local)
    }

    fn backend(analyzer: Box<dyn Analyzer>, cache: Option<&Path>) -> Backend {
        let options = BackendOptions {
            retry: RetryPolicy::none(),
            cache: cache.map(|d| Arc::new(ResponseCache::open(d).unwrap())),
            ..Default::default()
        };
        Backend::new(descriptor(), analyzer, options)
    }

    #[test]
    fn scores_failures_and_order() {
        let corpus = corpus();
        let config = ExperimentConfig::new(descriptor(), PromptMode::Base, Subset::All);
        let record = run_experiment(&config, &corpus, None, &PromptLibrary::builtin(), &backend(Box::new(EvenFlagger), None)).unwrap();
        assert_eq!(record.results.len(), 66);
        let ids: Vec<_> = record.results.iter().map(|r| r.case_id.as_str()).collect();
        let expected: Vec<_> = corpus.ids().collect();
        assert_eq!(ids, expected);
        // per category: 0,2,4 vuln flagged; 1 clean ok; 3 clean flagged; 5 failed -> clean, correct
        for s in record.scores.categories.values() {
            assert_eq!(s.counts.unwrap().correct(), 5);
        }
        assert_eq!(record.failure_counts["api_error"], 11);
        assert_eq!(record.exchanges, 66);
    }

    #[test]
    fn parallel_run_matches_serial() {
        let corpus = corpus();
        let split = stratified_split(&corpus, 0.5, 3).unwrap();
        let mut config = ExperimentConfig::new(descriptor(), PromptMode::AugmentedExpectedCategory, Subset::Test);
        let lib = PromptLibrary::builtin();
        let serial = run_experiment(&config, &corpus, Some(&split), &lib, &backend(Box::new(EvenFlagger), None)).unwrap();
        config.parallelism = 8;
        let parallel = run_experiment(&config, &corpus, Some(&split), &lib, &backend(Box::new(EvenFlagger), None)).unwrap();
        assert_eq!(serial.results, parallel.results);
        assert_eq!(serial.scores, parallel.scores);
        assert_eq!(serial.results.len(), 33);
    }

    #[test]
    fn warm_cache_makes_no_calls() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus();
        let config = ExperimentConfig::new(descriptor(), PromptMode::Base, Subset::All);
        let lib = PromptLibrary::builtin();
        let cold = run_experiment(&config, &corpus, None, &lib, &backend(Box::new(EvenFlagger), Some(dir.path()))).unwrap();
        let warm = run_experiment(&config, &corpus, None, &lib, &backend(Box::new(EvenFlagger), Some(dir.path()))).unwrap();
        // failed cases are not cached and are retried
        assert_eq!(cold.exchanges, 66);
        assert_eq!(warm.exchanges, 11);
        assert_eq!(warm.cache_hits, 55);
        assert_eq!(cold.scores, warm.scores);
    }

    #[test]
    fn auth_failure_aborts() {
        let corpus = corpus();
        let mut config = ExperimentConfig::new(descriptor(), PromptMode::Base, Subset::All);
        config.parallelism = 4;
        let err = run_experiment(&config, &corpus, None, &PromptLibrary::builtin(), &backend(Box::new(Unauthorized), None)).unwrap_err();
        assert!(matches!(err, EvalError::Backend(BackendError::AuthFailure(_))));
    }

    #[test]
    fn subset_without_split_and_zero_parallelism() {
        let corpus = corpus();
        let lib = PromptLibrary::builtin();
        let b = backend(Box::new(EvenFlagger), None);
        let config = ExperimentConfig::new(descriptor(), PromptMode::Base, Subset::Test);
        assert!(matches!(run_experiment(&config, &corpus, None, &lib, &b), Err(EvalError::Config(_))));
        let mut config = ExperimentConfig::new(descriptor(), PromptMode::Base, Subset::All);
        config.parallelism = 0;
        assert!(matches!(run_experiment(&config, &corpus, None, &lib, &b), Err(EvalError::Config(_))));
    }

    #[test]
    fn record_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus();
        let config = ExperimentConfig::new(descriptor(), PromptMode::Base, Subset::All);
        let record = run_experiment(&config, &corpus, None, &PromptLibrary::builtin(), &backend(Box::new(EvenFlagger), None)).unwrap();
        let path = dir.path().join("run.json");
        record.save(&path).unwrap();
        let loaded = RunRecord::load(&path).unwrap();
        assert_eq!(loaded, record);
        assert_eq!(loaded.rescore().unwrap(), record.scores);
        assert_eq!(loaded.config.decoding, "not applicable");
    }
}
