//! Benchmark corpus loading and category distribution.
//!
//! A corpus is a ground-truth manifest (one row per test case) plus a
//! directory tree holding one source file per case. The manifest follows
//! the benchmark's expected-results layout:
//!
//! ```text
//! # test name, category, real vulnerability, cwe
//! BenchmarkTest00001,pathtraver,true,22
//! ```
//!
//! Lines starting with `#` are comments. Columns past the fourth are ignored.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::category::VulnCategory;
use crate::digest::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("manifest line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("manifest line {line}: unknown category `{code}`")]
    UnknownCategory { line: usize, code: String },
    #[error("no source file for `{id}` under {root}")]
    MissingSource { id: String, root: PathBuf },
    #[error("source file name for `{id}` is ambiguous: {first} and {second}")]
    AmbiguousSource {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("duplicate test case id `{0}`")]
    DuplicateId(String),
    #[error("test case `{0}` has empty source text")]
    EmptySource(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub category: VulnCategory,
    /// `true` for the benchmark's "true positive" cases, `false` for its
    /// crafted look-alikes.
    pub is_vulnerable: bool,
    pub cwe: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub id: String,
    pub source_text: String,
    pub truth: GroundTruth,
}

/// One parsed manifest row, before its source file is attached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub id: String,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    cases: Vec<TestCase>,
    manifest_digest: String,
    by_id: HashMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Appended to the test name to find its source file, e.g. `.java`.
    pub extension: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            extension: ".java".to_string(),
        }
    }
}

impl Corpus {
    /// Builds a corpus from in-memory cases. Ids must be unique and every
    /// source text non-empty.
    pub fn from_cases(
        cases: Vec<TestCase>,
        manifest_digest: impl Into<String>,
    ) -> Result<Corpus, CorpusError> {
        let mut by_id = HashMap::with_capacity(cases.len());
        for (idx, case) in cases.iter().enumerate() {
            if case.source_text.is_empty() {
                return Err(CorpusError::EmptySource(case.id.clone()));
            }
            if by_id.insert(case.id.clone(), idx).is_some() {
                return Err(CorpusError::DuplicateId(case.id.clone()));
            }
        }
        Ok(Corpus {
            cases,
            manifest_digest: manifest_digest.into(),
            by_id,
        })
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TestCase> {
        self.by_id.get(id).map(|&i| &self.cases[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// SHA-256 of the manifest bytes the corpus was loaded from.
    pub fn manifest_digest(&self) -> &str {
        &self.manifest_digest
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.cases.iter().map(|c| c.id.as_str())
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRow>, CorpusError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(CorpusError::MalformedRow {
                line,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(CorpusError::MalformedRow {
                line,
                reason: "empty test name".to_string(),
            });
        }
        let category =
            VulnCategory::from_code(fields[1]).ok_or_else(|| CorpusError::UnknownCategory {
                line,
                code: fields[1].to_string(),
            })?;
        let is_vulnerable = match fields[2].to_ascii_lowercase().as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(CorpusError::MalformedRow {
                    line,
                    reason: format!("real-vulnerability column must be true or false, got `{other}`"),
                })
            }
        };
        let cwe = match fields[3] {
            "" => None,
            s => Some(s.parse::<u32>().map_err(|_| CorpusError::MalformedRow {
                line,
                reason: format!("cwe column is not a number: `{s}`"),
            })?),
        };
        rows.push(ManifestRow {
            id: id.to_string(),
            truth: GroundTruth {
                category,
                is_vulnerable,
                cwe,
            },
        });
    }
    Ok(rows)
}

pub fn load_corpus(source_root: &Path, manifest_path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with(source_root, manifest_path, &LoadOptions::default())
}

pub fn load_corpus_with(
    source_root: &Path,
    manifest_path: &Path,
    options: &LoadOptions,
) -> Result<Corpus, CorpusError> {
    let manifest_bytes = fs::read(manifest_path).map_err(|source| CorpusError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest_text = String::from_utf8_lossy(&manifest_bytes);
    let rows = parse_manifest(&manifest_text)?;
    let digest = sha256_hex(&manifest_bytes);
    if rows.is_empty() {
        return Corpus::from_cases(Vec::new(), digest);
    }

    let files = index_sources(source_root, &options.extension)?;
    let mut cases = Vec::with_capacity(rows.len());
    for row in rows {
        let file_name = format!("{}{}", row.id, options.extension);
        let path = match files.get(&file_name) {
            Some(Ok(path)) => path,
            Some(Err((first, second))) => {
                return Err(CorpusError::AmbiguousSource {
                    id: row.id,
                    first: first.clone(),
                    second: second.clone(),
                })
            }
            None => {
                return Err(CorpusError::MissingSource {
                    id: row.id,
                    root: source_root.to_path_buf(),
                })
            }
        };
        let bytes = fs::read(path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        cases.push(TestCase {
            id: row.id,
            source_text: String::from_utf8_lossy(&bytes).into_owned(),
            truth: row.truth,
        });
    }
    Corpus::from_cases(cases, digest)
}

type SourceIndex = HashMap<String, Result<PathBuf, (PathBuf, PathBuf)>>;

/// Maps file name to path for every file under `root` with the extension.
/// Names seen twice map to an error holding both paths.
fn index_sources(root: &Path, extension: &str) -> Result<SourceIndex, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "source root is not a directory"),
        });
    }
    let mut index: SourceIndex = HashMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if !name.ends_with(extension) {
            continue;
        }
        let path = entry.into_path();
        index
            .entry(name)
            .and_modify(|slot| {
                if let Ok(first) = slot {
                    *slot = Err((first.clone(), path.clone()));
                }
            })
            .or_insert(Ok(path));
    }
    Ok(index)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub vulnerable: usize,
    pub clean: usize,
}

impl CategoryCounts {
    pub fn total(&self) -> usize {
        self.vulnerable + self.clean
    }
}

/// Per-category (vulnerable, clean, total) counts. Every category is
/// present, including those with no cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    pub by_category: BTreeMap<VulnCategory, CategoryCounts>,
}

impl Distribution {
    pub fn get(&self, category: VulnCategory) -> CategoryCounts {
        self.by_category.get(&category).copied().unwrap_or_default()
    }

    pub fn totals(&self) -> CategoryCounts {
        self.by_category
            .values()
            .fold(CategoryCounts::default(), |acc, c| CategoryCounts {
                vulnerable: acc.vulnerable + c.vulnerable,
                clean: acc.clean + c.clean,
            })
    }
}

pub fn category_distribution(corpus: &Corpus) -> Distribution {
    let mut by_category: BTreeMap<VulnCategory, CategoryCounts> = VulnCategory::ALL
        .into_iter()
        .map(|c| (c, CategoryCounts::default()))
        .collect();
    for case in corpus.cases() {
        let counts = by_category.entry(case.truth.category).or_default();
        if case.truth.is_vulnerable {
            counts.vulnerable += 1;
        } else {
            counts.clean += 1;
        }
    }
    Distribution { by_category }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, rel: &str, body: &str) -> PathBuf {
        let path = dir.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    fn three_case_fixture() -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/a/T1.java", "class T1 {}\n");
        write(dir.path(), "src/b/T2.java", "class T2 {}\n");
        write(dir.path(), "src/T3.java", "class T3 {}\n");
        let manifest = write(
            dir.path(),
            "expected.csv",
            "# test name, category, real vulnerability, cwe\n\
             T1,sqli,true,89\n\
             T2,SQLI,true,89,extra,columns\n\
             T3,sqli,false,89\n",
        );
        (dir, manifest)
    }

    #[test]
    fn loads_three_row_fixture() {
        let (dir, manifest) = three_case_fixture();
        let corpus = load_corpus(&dir.path().join("src"), &manifest).unwrap();
        assert_eq!(corpus.len(), 3);
        let t2 = corpus.get("T2").unwrap();
        assert_eq!(t2.truth.category, VulnCategory::Sqli);
        assert!(t2.truth.is_vulnerable);
        assert_eq!(t2.truth.cwe, Some(89));
        assert_eq!(t2.source_text, "class T2 {}\n");
        assert!(!corpus.get("T3").unwrap().truth.is_vulnerable);
        assert_eq!(corpus.manifest_digest().len(), 64);

        let dist = category_distribution(&corpus);
        assert_eq!(
            dist.get(VulnCategory::Sqli),
            CategoryCounts {
                vulnerable: 2,
                clean: 1
            }
        );
        assert_eq!(dist.totals().total(), 3);
    }

    #[test]
    fn empty_manifest_gives_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write(dir.path(), "m.csv", "# header only\n");
        let corpus = load_corpus(&dir.path().join("nowhere"), &manifest).unwrap();
        assert!(corpus.is_empty());
        let dist = category_distribution(&corpus);
        assert_eq!(dist.by_category.len(), 11);
        assert!(dist.by_category.values().all(|c| c.total() == 0));
    }

    #[test]
    fn missing_source_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/T1.java", "x");
        let manifest = write(dir.path(), "m.csv", "T1,xss,true,79\nT9,xss,false,79\n");
        let err = load_corpus(&dir.path().join("src"), &manifest).unwrap_err();
        assert!(matches!(err, CorpusError::MissingSource { ref id, .. } if id == "T9"));
    }

    #[test]
    fn malformed_and_unknown_rows() {
        assert!(matches!(
            parse_manifest("T1,xss,true\n"),
            Err(CorpusError::MalformedRow { line: 1, .. })
        ));
        assert!(matches!(
            parse_manifest("# c\nT1,xss,maybe,79\n"),
            Err(CorpusError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            parse_manifest("T1,xss,true,seventy\n"),
            Err(CorpusError::MalformedRow { .. })
        ));
        assert!(matches!(
            parse_manifest("T1,bufferoverflow,true,120\n"),
            Err(CorpusError::UnknownCategory { ref code, .. }) if code == "bufferoverflow"
        ));
        let rows = parse_manifest("T1,xss,TRUE,\n").unwrap();
        assert_eq!(rows[0].truth.cwe, None);
    }

    #[test]
    fn duplicate_ids_and_empty_sources_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/T1.java", "x");
        let manifest = write(dir.path(), "m.csv", "T1,xss,true,79\nT1,xss,false,79\n");
        assert!(matches!(
            load_corpus(&dir.path().join("src"), &manifest),
            Err(CorpusError::DuplicateId(_))
        ));

        write(dir.path(), "src2/E.java", "");
        let manifest = write(dir.path(), "m2.csv", "E,xss,true,79\n");
        assert!(matches!(
            load_corpus(&dir.path().join("src2"), &manifest),
            Err(CorpusError::EmptySource(_))
        ));
    }

    #[test]
    fn same_file_name_in_two_directories_is_ambiguous() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/a/T1.java", "x");
        write(dir.path(), "src/b/T1.java", "y");
        let manifest = write(dir.path(), "m.csv", "T1,xss,true,79\n");
        assert!(matches!(
            load_corpus(&dir.path().join("src"), &manifest),
            Err(CorpusError::AmbiguousSource { .. })
        ));
    }

    #[test]
    fn custom_extension() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "src/T1.py", "print(1)");
        let manifest = write(dir.path(), "m.csv", "T1,cmdi,true,78\n");
        let opts = LoadOptions {
            extension: ".py".into(),
        };
        let corpus = load_corpus_with(&dir.path().join("src"), &manifest, &opts).unwrap();
        assert_eq!(corpus.get("T1").unwrap().source_text, "print(1)");
    }
}
