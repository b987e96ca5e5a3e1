//! Python bindings: corpus loading and splitting, prompt assembly, response
//! parsing, the rule engine, experiment runs and report rendering.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use sastbench::backend::{Backend, BackendDescriptor, BackendOptions, BackendSetup, MockScript};
use sastbench::report::{render_distribution, render_scorecard};
use sastbench::split::split_with;
use sastbench::{
    category_distribution, CaseResult, CorpusSplit, ExperimentConfig, GroundTruth, PromptLibrary,
    PromptMode, ReportFormat, RunRecord, Subset, VulnCategory,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn category(code: &str) -> PyResult<VulnCategory> {
    code.parse::<VulnCategory>().map_err(value_err)
}

fn format_of(name: &str) -> PyResult<ReportFormat> {
    name.parse().map_err(value_err)
}

/// A labeled corpus of test cases.
#[pyclass(module = "sastbench_py", frozen)]
pub struct Corpus {
    inner: sastbench::Corpus,
}

#[pymethods]
impl Corpus {
    /// Loads case sources from `source_root` labeled by the expected-results
    /// CSV at `manifest`.
    #[staticmethod]
    fn load(source_root: PathBuf, manifest: PathBuf) -> PyResult<Self> {
        let inner = sastbench::load_corpus(&source_root, &manifest).map_err(value_err)?;
        Ok(Corpus { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn manifest_digest(&self) -> String {
        self.inner.manifest_digest().to_string()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_string).collect()
    }

    /// `(category code, is vulnerable)` for one case.
    fn truth(&self, case_id: &str) -> PyResult<(String, bool)> {
        let case = self.inner.get(case_id).ok_or_else(|| PyKeyError::new_err(case_id.to_string()))?;
        Ok((case.truth.category.code().to_string(), case.truth.is_vulnerable))
    }

    fn source(&self, case_id: &str) -> PyResult<String> {
        let case = self.inner.get(case_id).ok_or_else(|| PyKeyError::new_err(case_id.to_string()))?;
        Ok(case.source_text.clone())
    }

    /// Category code to `(vulnerable, clean, total)`.
    fn distribution(&self) -> BTreeMap<String, (usize, usize, usize)> {
        let dist = category_distribution(&self.inner);
        VulnCategory::ALL
            .iter()
            .map(|&c| {
                let n = dist.get(c);
                (c.code().to_string(), (n.vulnerable, n.clean, n.total()))
            })
            .collect()
    }

    #[pyo3(signature = (format = "markdown"))]
    fn render_distribution(&self, format: &str) -> PyResult<String> {
        Ok(render_distribution(&category_distribution(&self.inner), format_of(format)?))
    }

    #[pyo3(signature = (fraction = 0.2, seed = 0, by_truth = false))]
    fn split(&self, fraction: f64, seed: u64, by_truth: bool) -> PyResult<Split> {
        let inner = split_with(&self.inner, fraction, seed, by_truth).map_err(value_err)?;
        Ok(Split { inner })
    }

    /// The prompt sent for `case_id` in `mode` (base, augmented or
    /// augmented-all), using the built-in templates.
    #[pyo3(signature = (case_id, mode = "base"))]
    fn prompt(&self, case_id: &str, mode: &str) -> PyResult<String> {
        let case = self.inner.get(case_id).ok_or_else(|| PyKeyError::new_err(case_id.to_string()))?;
        let mode: PromptMode = mode.parse().map_err(value_err)?;
        Ok(PromptLibrary::builtin().assemble(case, mode))
    }
}

/// A per-category train/test split.
#[pyclass(module = "sastbench_py", frozen)]
pub struct Split {
    inner: CorpusSplit,
}

#[pymethods]
impl Split {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Split { inner: CorpusSplit::load(&path).map_err(value_err)? })
    }

    #[getter]
    fn train(&self) -> Vec<String> {
        self.inner.train.clone()
    }

    #[getter]
    fn test(&self) -> Vec<String> {
        self.inner.test.clone()
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(value_err)
    }
}

/// Parses a raw analyzer response into `(category code, line, reason)`
/// findings. Never raises.
#[pyfunction]
fn parse_response(raw: &str) -> Vec<(String, u32, String)> {
    sastbench::parse_response(raw)
        .findings
        .into_iter()
        .map(|f| (f.category.code().to_string(), f.line, f.reason))
        .collect()
}

/// Whether a response flags a case whose expected category is `expected`.
#[pyfunction]
fn predicts_vulnerable(raw: &str, expected: &str) -> PyResult<bool> {
    let outcome = sastbench::parse_response(raw);
    Ok(sastbench::verdict(&outcome, category(expected)?, "").predicted_vulnerable)
}

#[pyfunction]
fn rule_engine_analyze(source: &str) -> String {
    sastbench::backend::rule_engine_analyze(source)
}

/// Scores `(category code, truly vulnerable, predicted vulnerable)` triples.
/// Returns category code to accuracy plus an `"overall"` entry.
#[pyfunction]
fn score(results: Vec<(String, bool, bool)>) -> PyResult<BTreeMap<String, f64>> {
    let mut cases = Vec::with_capacity(results.len());
    for (i, (code, truth, predicted)) in results.into_iter().enumerate() {
        let c = category(&code)?;
        let raw = if predicted { format!("{code},1,flagged") } else { String::new() };
        let verdict = sastbench::verdict(&sastbench::parse_response(&raw), c, &i.to_string());
        cases.push(CaseResult::new(GroundTruth { category: c, is_vulnerable: truth, cwe: None }, verdict));
    }
    let card = sastbench::score(&cases).map_err(value_err)?;
    let mut out: BTreeMap<String, f64> =
        card.categories.iter().map(|(c, s)| (c.code().to_string(), s.accuracy)).collect();
    out.insert("overall".into(), card.overall.accuracy);
    Ok(out)
}

/// Runs a local backend (`rules` or `mock`) over the corpus and returns the
/// run record as JSON. Remote backends are left to the command-line tool.
#[pyfunction]
#[pyo3(signature = (corpus, backend = "rules", mode = "base", subset = "all", split = None, mock_script = None, parallelism = 1))]
fn run(
    corpus: &Corpus,
    backend: &str,
    mode: &str,
    subset: &str,
    split: Option<&Split>,
    mock_script: Option<PathBuf>,
    parallelism: usize,
) -> PyResult<String> {
    let descriptor = BackendDescriptor::builtin(backend)
        .ok_or_else(|| PyValueError::new_err(format!("unknown backend `{backend}`")))?;
    if descriptor.api_kind.is_remote() {
        return Err(PyValueError::new_err(format!("`{backend}` is a remote backend; use the command-line tool")));
    }
    let mut setup = BackendSetup::default();
    if let Some(path) = mock_script {
        setup.mock_script = Some(MockScript::load(&path).map_err(value_err)?);
    }
    let engine = Backend::from_descriptor(descriptor.clone(), BackendOptions::default(), setup).map_err(value_err)?;
    let mut config = ExperimentConfig::new(descriptor, mode.parse().map_err(value_err)?, subset.parse::<Subset>().map_err(value_err)?);
    config.parallelism = parallelism;
    let record = sastbench::run_experiment(
        &config,
        &corpus.inner,
        split.map(|s| &s.inner),
        &PromptLibrary::builtin(),
        &engine,
    )
    .map_err(value_err)?;
    Ok(record.to_json())
}

/// Renders the scorecard of a run record given as JSON.
#[pyfunction]
#[pyo3(signature = (record_json, format = "markdown"))]
fn render_run(record_json: &str, format: &str) -> PyResult<String> {
    let record: RunRecord = serde_json::from_str(record_json).map_err(value_err)?;
    Ok(render_scorecard(&record.scores, format_of(format)?))
}

#[pyfunction]
fn categories() -> Vec<(String, String, String)> {
    VulnCategory::ALL
        .iter()
        .map(|c| (c.code().to_string(), c.display_name().to_string(), c.error_class().label().to_string()))
        .collect()
}

#[pymodule]
fn sastbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Split>()?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(predicts_vulnerable, m)?)?;
    m.add_function(wrap_pyfunction!(rule_engine_analyze, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(render_run, m)?)?;
    m.add_function(wrap_pyfunction!(categories, m)?)?;
    Ok(())
}
