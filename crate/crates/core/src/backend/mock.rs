//! Scripted replay backend.
//!
//! A script maps case ids (or prompt digests) to canned response text. It is
//! either a JSON file:
//!
//! ```json
//! {
//!   "by_case": { "BenchmarkTest00001": "cmdi,31,exec with user input" },
//!   "by_prompt_digest": { "<sha256 of prompt>": "none,0,clean" },
//!   "default": "none,0,nothing found"
//! }
//! ```
//!
//! or a directory of `<case id>.txt` files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Analyzer, BackendError, CompletionRequest};
use crate::corpus::Corpus;
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_case: BTreeMap<String, String>,
    #[serde(default)]
    pub by_prompt_digest: BTreeMap<String, String>,
    #[serde(default)]
    pub default: Option<String>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<MockScript, BackendError> {
        let err = |e: String| BackendError::Config(format!("mock script {}: {e}", path.display()));
        if path.is_dir() {
            let mut script = MockScript::default();
            let mut entries: Vec<_> = fs::read_dir(path)
                .map_err(|e| err(e.to_string()))?
                .collect::<Result<_, _>>()
                .map_err(|e| err(e.to_string()))?;
            entries.sort_by_key(|e| e.file_name());
            for entry in entries {
                let p = entry.path();
                if p.extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
                let text = fs::read_to_string(&p).map_err(|e| err(e.to_string()))?;
                script.by_case.insert(stem, text);
            }
            Ok(script)
        } else {
            let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| err(e.to_string()))
        }
    }

    /// A script that answers every case with its ground truth.
    pub fn oracle(corpus: &Corpus) -> MockScript {
        let by_case = corpus
            .cases()
            .iter()
            .map(|case| {
                let answer = if case.truth.is_vulnerable {
                    format!("{},1,labeled vulnerable", case.truth.category.code())
                } else {
                    "none,0,labeled clean".to_string()
                };
                (case.id.clone(), answer)
            })
            .collect();
        MockScript {
            by_case,
            ..Default::default()
        }
    }

    /// Lookup order: case id, then prompt digest, then the default.
    pub fn lookup(&self, case_id: &str, prompt: &str) -> Option<&str> {
        self.by_case
            .get(case_id)
            .or_else(|| self.by_prompt_digest.get(&sha256_hex(prompt.as_bytes())))
            .or(self.default.as_ref())
            .map(String::as_str)
    }
}

pub struct MockReplay {
    script: MockScript,
}

impl MockReplay {
    pub fn new(script: MockScript) -> Self {
        MockReplay { script }
    }
}

impl Analyzer for MockReplay {
    fn exchange(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        match self.script.lookup(&request.case_id, &request.prompt) {
            Some(text) => Ok(text.to_string()),
            None => {
                log::debug!("mock script has no entry for {}", request.case_id);
                Err(BackendError::EmptyResponse)
            }
        }
    }
}
