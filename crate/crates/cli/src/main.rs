mod settings;

use std::collections::BTreeMap;
use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{ArgAction, Parser, Subcommand};
use sastbench::backend::{
    Backend, BackendDescriptor, BackendOptions, BackendSetup, MockScript, RateLimit, ResponseCache,
    RetryPolicy, ApiKind,
};
use sastbench::report::{render_comparison, render_diff, render_distribution, render_scorecard, render_triage, Table};
use sastbench::split::split_with;
use sastbench::{
    category_distribution, compare, diff_runs, ingest_baseline_scorecard, load_corpus, run_experiment,
    triage, Corpus, CorpusSplit, ExperimentConfig, PromptLibrary, PromptMode, ReportFormat, RunRecord,
    Subset, VulnCategory,
};

use settings::{Settings, DEFAULT_FRACTION, DEFAULT_SEED};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "sastbench", version, about = "Benchmark harness for source-code vulnerability analyzers")]
struct Cli {
    /// TOML file with default values for any of the global flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print its per-category distribution.
    Ingest,
    /// Write a stratified train/test split file.
    Split {
        /// Output path; defaults to --split-file, then split.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every case of a subset through a backend and write the run record.
    Run {
        /// Run record path; defaults to runs/<label>.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Print per-category accuracy of saved run records.
    Score {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Comparison table of runs against baseline scorecards.
    Report {
        runs: Vec<PathBuf>,
        /// Baseline scorecard file; repeatable.
        #[arg(long = "baseline", value_name = "FILE")]
        baselines: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-category accuracy change between two runs.
    Diff { base: PathBuf, other: PathBuf },
    /// List misclassified cases grouped by error class and category.
    Triage { run: PathBuf },
    /// Delete every cached response.
    CacheClear,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let s = cli.settings.over(file).over(Settings::from_env()?);
    let mut out = std::io::stdout().lock();
    use std::io::Write;
    let text = match cli.command {
        Command::Ingest => cmd_ingest(&s)?,
        Command::Split { out } => cmd_split(&s, out)?,
        Command::Run { out, label } => cmd_run(&s, out, label)?,
        Command::Score { runs } => cmd_score(&s, &runs)?,
        Command::Report { runs, baselines, out } => {
            let text = cmd_report(&s, &runs, &baselines)?;
            if let Some(path) = out {
                std::fs::write(&path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
                eprintln!("wrote {}", path.display());
                return Ok(());
            }
            text
        }
        Command::Diff { base, other } => cmd_diff(&s, &base, &other)?,
        Command::Triage { run } => cmd_triage(&s, &run)?,
        Command::CacheClear => cmd_cache_clear(&s)?,
    };
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn format_of(s: &Settings) -> Result<ReportFormat> {
    Ok(s.format.as_deref().unwrap_or("markdown").parse::<ReportFormat>()?)
}

fn subset_of(s: &Settings) -> Result<Subset> {
    Ok(s.subset.as_deref().unwrap_or("all").parse::<Subset>()?)
}

fn mode_of(s: &Settings) -> Result<PromptMode> {
    Ok(s.mode.as_deref().unwrap_or("base").parse::<PromptMode>()?)
}

fn corpus_of(s: &Settings) -> Result<Corpus> {
    let root = s.corpus.as_ref().ok_or("--corpus is required")?;
    let manifest = s.manifest.as_ref().ok_or("--manifest is required")?;
    let corpus = load_corpus(root, manifest)?;
    if corpus.is_empty() {
        return Err(format!("{} lists no test cases", manifest.display()).into());
    }
    Ok(corpus)
}

fn load_split(s: &Settings, corpus: Option<&Corpus>) -> Result<Option<CorpusSplit>> {
    let Some(path) = &s.split_file else { return Ok(None) };
    let split = CorpusSplit::load(path)?;
    if let Some(corpus) = corpus {
        split.check_corpus(corpus)?;
    }
    Ok(Some(split))
}

fn cmd_ingest(s: &Settings) -> Result<String> {
    let corpus = corpus_of(s)?;
    eprintln!("{} cases, manifest sha256 {}", corpus.len(), corpus.manifest_digest());
    Ok(render_distribution(&category_distribution(&corpus), format_of(s)?))
}

fn cmd_split(s: &Settings, out: Option<PathBuf>) -> Result<String> {
    let corpus = corpus_of(s)?;
    let fraction = s.fraction.unwrap_or(DEFAULT_FRACTION);
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    let split = split_with(&corpus, fraction, seed, s.by_truth.unwrap_or(false))?;
    let path = out
        .or_else(|| s.split_file.clone())
        .unwrap_or_else(|| PathBuf::from("split.json"));
    split.save(&path)?;
    eprintln!("wrote {}", path.display());

    let mut counts: BTreeMap<VulnCategory, (usize, usize)> = BTreeMap::new();
    for (ids, train) in [(&split.train, true), (&split.test, false)] {
        for id in ids {
            let entry = counts.entry(corpus.get(id).expect("split of this corpus").truth.category).or_default();
            if train {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
    }
    let mut t = Table::new(["Category", "Train", "Test"]);
    for (c, (train, test)) in &counts {
        t.push([c.display_name().to_string(), train.to_string(), test.to_string()]);
    }
    t.push(["Total".to_string(), split.train.len().to_string(), split.test.len().to_string()]);
    Ok(t.render(format_of(s)?))
}

fn read_line_hints(path: &Path) -> Result<BTreeMap<String, u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut hints = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, n) = line
            .split_once(',')
            .ok_or_else(|| format!("{}:{}: expected `case id,line`", path.display(), i + 1))?;
        let n: u32 = n
            .trim()
            .parse()
            .map_err(|_| format!("{}:{}: bad line number `{}`", path.display(), i + 1, n.trim()))?;
        hints.insert(id.trim().to_string(), n);
    }
    Ok(hints)
}

fn descriptor_of(s: &Settings) -> Result<BackendDescriptor> {
    let name = s.backend.as_deref().ok_or("--backend is required")?;
    let mut d = BackendDescriptor::builtin(name).ok_or_else(|| {
        let known: Vec<String> = BackendDescriptor::builtins().iter().map(|d| d.slug()).collect();
        format!("unknown backend `{name}` (known: {})", known.join(", "))
    })?;
    if let Some(model) = &s.model {
        d.model_id = model.clone();
    }
    if s.api_base.is_some() {
        d.api_base = s.api_base.clone();
    }
    if s.temperature.is_some() {
        d.temperature = s.temperature;
    }
    Ok(d)
}

fn cmd_run(s: &Settings, out: Option<PathBuf>, label: Option<String>) -> Result<String> {
    let corpus = corpus_of(s)?;
    let subset = subset_of(s)?;
    let split = load_split(s, Some(&corpus))?;
    if subset != Subset::All && split.is_none() {
        return Err(format!("--subset {subset} needs --split-file").into());
    }
    let library = match &s.prompts {
        Some(dir) => PromptLibrary::load_dir(dir)?,
        None => PromptLibrary::builtin(),
    };
    let descriptor = descriptor_of(s)?;

    let mut options = BackendOptions::default();
    if let Some(n) = s.max_retries {
        options.retry = RetryPolicy {
            max_retries: n,
            ..RetryPolicy::default()
        };
    }
    if let Some(per_minute) = s.rate_limit {
        options.rate_limit = Some(RateLimit {
            max_requests: per_minute.max(1),
            window: Duration::from_secs(60),
        });
    }
    if let Some(dir) = s.cache_dir() {
        options.cache = Some(Arc::new(ResponseCache::open(dir)?));
    }
    let mut setup = BackendSetup::default();
    if descriptor.api_kind == ApiKind::MockReplay {
        let path = s.mock_script.as_ref().ok_or("the mock backend needs --mock-script")?;
        setup.mock_script = Some(MockScript::load(path)?);
    }
    let backend = Backend::from_descriptor(descriptor.clone(), options, setup)?;

    let mut config = ExperimentConfig::new(descriptor, mode_of(s)?, subset);
    config.parallelism = s.parallelism.unwrap_or(1);
    config.cache_dir = s.cache_dir();
    if let Some(label) = label {
        config.run_label = label;
    }
    if let Some(secs) = s.max_wait {
        config.max_wait = Duration::from_secs(secs);
    }
    if let Some(path) = &s.line_hints {
        config.line_hints = read_line_hints(path)?;
        config.line_tolerance = Some(s.line_tolerance.unwrap_or(0));
    }

    let record = run_experiment(&config, &corpus, split.as_ref(), &library, &backend)?;
    let path = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("{}.json", record.run_label)));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    record.save(&path)?;
    eprintln!(
        "wrote {} ({} analyzer calls, {} cache hits)",
        path.display(),
        record.exchanges,
        record.cache_hits
    );

    let failed: usize = record.failure_counts.values().sum();
    if failed > 0 {
        let detail: Vec<String> = record.failure_counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        eprintln!(
            "warning: {failed} of {} cases got no usable response ({}); they are scored as not flagged",
            record.results.len(),
            detail.join(", ")
        );
    }
    let mut text = render_scorecard(&record.scores, format_of(s)?);
    if format_of(s)? != ReportFormat::Csv {
        text.push_str(&format!("\nfailed cases: {failed}\n"));
    }
    Ok(text)
}

fn cmd_score(s: &Settings, runs: &[PathBuf]) -> Result<String> {
    let format = format_of(s)?;
    let mut out = String::new();
    for (i, path) in runs.iter().enumerate() {
        let record = RunRecord::load(path)?;
        let card = record.rescore()?;
        if card != record.scores {
            eprintln!("warning: stored scores in {} differ from its case results; showing recomputed scores", path.display());
        }
        if runs.len() > 1 && format != ReportFormat::Csv {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("{}\n\n", record.run_label));
        }
        out.push_str(&render_scorecard(&card, format));
    }
    Ok(out)
}

fn cmd_report(s: &Settings, runs: &[PathBuf], baselines: &[PathBuf]) -> Result<String> {
    if runs.is_empty() && baselines.is_empty() {
        return Err("give at least one run record or --baseline".into());
    }
    let runs = runs.iter().map(|p| RunRecord::load(p)).collect::<std::result::Result<Vec<_>, _>>()?;
    let baselines = baselines
        .iter()
        .map(|p| ingest_baseline_scorecard(p))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let table = compare(&runs, &baselines)?;
    Ok(render_comparison(&table, format_of(s)?))
}

fn cmd_diff(s: &Settings, base: &Path, other: &Path) -> Result<String> {
    let diff = diff_runs(&RunRecord::load(base)?, &RunRecord::load(other)?)?;
    let regressions: Vec<&str> = diff.regressions().map(|r| r.category.code()).collect();
    if !regressions.is_empty() {
        eprintln!("regressions: {}", regressions.join(", "));
    }
    Ok(render_diff(&diff, format_of(s)?))
}

fn cmd_triage(s: &Settings, run: &Path) -> Result<String> {
    let record = RunRecord::load(run)?;
    let corpus = match (&s.corpus, &s.manifest) {
        (Some(_), Some(_)) => Some(corpus_of(s)?),
        _ => None,
    };
    let split = load_split(s, corpus.as_ref())?;
    let subset = subset_of(s)?;
    if subset != Subset::All && split.is_none() {
        return Err(format!("--subset {subset} needs --split-file").into());
    }
    let report = triage(&record, corpus.as_ref(), split.as_ref(), subset);
    Ok(render_triage(&report, format_of(s)?))
}

fn cmd_cache_clear(s: &Settings) -> Result<String> {
    let dir = s.cache_dir().ok_or("the cache is disabled")?;
    if !dir.exists() {
        return Ok(format!("no cache at {}\n", dir.display()));
    }
    let removed = ResponseCache::open(&dir)?.clear()?;
    Ok(format!("removed {removed} cached responses from {}\n", dir.display()))
}
