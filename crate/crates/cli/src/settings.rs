//! Effective settings: command-line flags over a TOML config file over
//! `SASTBENCH_*` environment variables over built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

/// Every setting that can come from a flag, the config file or the
/// environment. Config file keys are the flag names without the dashes
/// prefix (`split-file = "split.json"`); environment variables are the
/// upper-cased key with underscores (`SASTBENCH_SPLIT_FILE`).
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Directory holding the case source files.
    #[arg(long, global = true, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Expected-results CSV labeling each case.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Train/test split file written by `split`.
    #[arg(long, global = true, value_name = "FILE")]
    pub split_file: Option<PathBuf>,
    /// Backend name, e.g. gpt-4-turbo-assistant, gemini-pro, rules, mock.
    #[arg(long, global = true, value_name = "NAME")]
    pub backend: Option<String>,
    /// Prompt mode: base, augmented or augmented-all.
    #[arg(long, global = true, value_name = "MODE")]
    pub mode: Option<String>,
    /// Subset to run or filter on: train, test or all.
    #[arg(long, global = true, value_name = "SUBSET")]
    pub subset: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cases in flight at once.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Disable the response cache.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub no_cache: Option<bool>,
    /// Output format: markdown, csv or plain.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Training fraction for `split`.
    #[arg(long, global = true)]
    pub fraction: Option<f64>,
    /// Stratify the split by (category, vulnerable) rather than category.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub by_truth: Option<bool>,
    /// Directory with base.txt and augment/<code>.txt overriding the
    /// built-in prompts.
    #[arg(long, global = true, value_name = "DIR")]
    pub prompts: Option<PathBuf>,
    /// Response script for the mock backend (JSON file or directory).
    #[arg(long, global = true, value_name = "PATH")]
    pub mock_script: Option<PathBuf>,
    /// Overrides the backend's model id.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Overrides the backend's endpoint root.
    #[arg(long, global = true, value_name = "URL")]
    pub api_base: Option<String>,
    /// Sampling temperature; provider default when unset.
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Seconds allowed per case, including retries and polling.
    #[arg(long, global = true, value_name = "SECS")]
    pub max_wait: Option<u64>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Requests allowed per minute.
    #[arg(long, global = true, value_name = "N")]
    pub rate_limit: Option<usize>,
    /// CSV of `case id,line` giving each case's sink line.
    #[arg(long, global = true, value_name = "FILE")]
    pub line_hints: Option<PathBuf>,
    /// With line hints, only count findings within this many lines.
    #[arg(long, global = true, value_name = "N")]
    pub line_tolerance: Option<u32>,
}

pub const ENV_PREFIX: &str = "SASTBENCH_";

const KEYS: &[&str] = &[
    "corpus", "manifest", "split-file", "backend", "mode", "subset", "seed", "parallelism",
    "cache-dir", "no-cache", "format", "fraction", "by-truth", "prompts", "mock-script", "model",
    "api-base", "temperature", "max-wait", "max-retries", "rate-limit", "line-hints",
    "line-tolerance",
];

pub const DEFAULT_CACHE_DIR: &str = ".sastbench-cache";
pub const DEFAULT_FRACTION: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 0;

macro_rules! layer {
    ($top:expr, $low:expr, [$($f:ident),* $(,)?]) => {
        Settings { $($f: $top.$f.or($low.$f)),* }
    };
}

impl Settings {
    /// Fills every unset field from `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        layer!(self, lower, [
            corpus, manifest, split_file, backend, mode, subset, seed, parallelism, cache_dir,
            no_cache, format, fraction, by_truth, prompts, mock_script, model, api_base,
            temperature, max_wait, max_retries, rate_limit, line_hints, line_tolerance,
        ])
    }

    pub fn from_toml(text: &str) -> Result<Settings, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Settings, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Reads `SASTBENCH_*` variables for the known keys through `lookup`.
    pub fn from_env_with(lookup: impl Fn(&str) -> Option<String>) -> Result<Settings, String> {
        let mut table = toml::Table::new();
        for key in KEYS {
            let var = format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace('-', "_"));
            let Some(raw) = lookup(&var) else { continue };
            let value = format!("v = {raw}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or(toml::Value::String(raw));
            table.insert(key.to_string(), value);
        }
        table.try_into().map_err(|e: toml::de::Error| format!("environment: {e}"))
    }

    pub fn from_env() -> Result<Settings, String> {
        Self::from_env_with(|k| std::env::var(k).ok())
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        if self.no_cache.unwrap_or(false) {
            return None;
        }
        Some(self.cache_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)))
    }
}
