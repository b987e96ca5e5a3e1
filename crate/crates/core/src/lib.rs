//! Benchmark harness for source-code vulnerability analyzers.
//!
//! The workflow mirrors a human-in-the-loop prompt engineering cycle:
//! load a labeled corpus, split it per category into train and test,
//! assemble prompts, ask an analyzer backend, parse its CSV findings,
//! score per category and compare runs against external baselines.

pub mod backend;
pub mod category;
pub mod corpus;
mod digest;
pub mod eval;
pub mod findings;
pub mod prompt;
pub mod report;
pub mod split;

pub use category::{error_class_of, ErrorClass, VulnCategory};
pub use corpus::{
    category_distribution, load_corpus, load_corpus_with, CategoryCounts, Corpus, CorpusError,
    Distribution, GroundTruth, LoadOptions, TestCase,
};
pub use digest::sha256_hex;
pub use findings::{normalize_category, parse_response, verdict, Finding, ParseOutcome, Verdict};
pub use prompt::{assemble, PromptLibrary, PromptMode, PromptTemplate};
pub use split::{stratified_split, CorpusSplit, SplitError, Subset};
pub use eval::{
    compare, diff_runs, ingest_baseline_scorecard, run_experiment, score, triage,
    BaselineScorecard, CaseResult, CategoryScore, ComparisonTable, Confusion, DiffTable,
    EvalError, ExperimentConfig, RunRecord, Scorecard, TriageReport,
};
pub use report::ReportFormat;
