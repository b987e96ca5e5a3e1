//! Seeded, per-category train/test splitting.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::category::VulnCategory;
use crate::corpus::Corpus;
use crate::digest::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum SplitError {
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("split was made for manifest {expected}, corpus has {actual}")]
    ManifestMismatch { expected: String, actual: String },
    #[error("split file {path}: {reason}")]
    File { path: String, reason: String },
}

/// Which part of a split an operation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Test,
    All,
}

impl Subset {
    pub fn label(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Test => "test",
            Subset::All => "all",
        }
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Subset::Train),
            "test" => Ok(Subset::Test),
            "all" => Ok(Subset::All),
            other => Err(format!("unknown subset `{other}` (expected train, test or all)")),
        }
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A partition of corpus ids into training and testing sets.
///
/// Both lists keep corpus order, so serializing the same split twice gives
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub fraction: f64,
    pub seed: u64,
    /// Whether vulnerable and clean cases were split separately.
    #[serde(default)]
    pub by_truth: bool,
    pub manifest_digest: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Training-set size for a category of `n` cases: `fraction * n` rounded
/// half up. The small epsilon absorbs binary representation error so that
/// e.g. `0.3 * 5` counts as exactly 1.5.
pub fn train_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 0.5 + 1e-9).floor() as usize
}

pub fn stratified_split(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
) -> Result<CorpusSplit, SplitError> {
    split_with(corpus, fraction, seed, false)
}

/// Like [`stratified_split`], optionally stratifying by (category,
/// vulnerable) instead of category alone. With `by_truth` the per-category
/// training count is the sum of two rounded strata and may differ by one
/// from `train_count(fraction, n)`.
pub fn split_with(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
    by_truth: bool,
) -> Result<CorpusSplit, SplitError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError::BadFraction(fraction));
    }
    if corpus.is_empty() {
        return Err(SplitError::EmptyCorpus);
    }

    // stratum key -> ids sorted by id, so manifest row order is irrelevant
    let mut strata: BTreeMap<(VulnCategory, bool), Vec<&str>> = BTreeMap::new();
    for case in corpus.cases() {
        let key = (
            case.truth.category,
            by_truth && case.truth.is_vulnerable,
        );
        strata.entry(key).or_default().push(case.id.as_str());
    }

    let mut train_ids: HashSet<&str> = HashSet::new();
    for ((category, vulnerable), mut ids) in strata {
        ids.sort_unstable();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(category.index() as u64 * 2 + vulnerable as u64);
        ids.shuffle(&mut rng);
        let k = train_count(fraction, ids.len());
        train_ids.extend(ids.into_iter().take(k));
    }

    let (train, test): (Vec<_>, Vec<_>) = corpus
        .ids()
        .map(str::to_string)
        .partition(|id| train_ids.contains(id.as_str()));

    Ok(CorpusSplit {
        fraction,
        seed,
        by_truth,
        manifest_digest: corpus.manifest_digest().to_string(),
        train,
        test,
    })
}

impl CorpusSplit {
    /// Ids covered by `subset`, in corpus order.
    pub fn ids(&self, subset: Subset) -> Vec<&str> {
        match subset {
            Subset::Train => self.train.iter().map(String::as_str).collect(),
            Subset::Test => self.test.iter().map(String::as_str).collect(),
            Subset::All => {
                let train: HashSet<&str> = self.train.iter().map(String::as_str).collect();
                let mut all: Vec<&str> = self.train.iter().map(String::as_str).collect();
                all.extend(self.test.iter().map(String::as_str).filter(|id| !train.contains(id)));
                all
            }
        }
    }

    pub fn contains(&self, subset: Subset, id: &str) -> bool {
        match subset {
            Subset::Train => self.train.iter().any(|t| t == id),
            Subset::Test => self.test.iter().any(|t| t == id),
            Subset::All => self.train.iter().chain(&self.test).any(|t| t == id),
        }
    }

    /// Content digest identifying this exact partition.
    pub fn digest(&self) -> String {
        let mut buf = String::new();
        for id in &self.train {
            buf.push_str(id);
            buf.push('\n');
        }
        buf.push('\0');
        for id in &self.test {
            buf.push_str(id);
            buf.push('\n');
        }
        sha256_hex(buf.as_bytes())
    }

    pub fn check_corpus(&self, corpus: &Corpus) -> Result<(), SplitError> {
        if self.manifest_digest != corpus.manifest_digest() {
            return Err(SplitError::ManifestMismatch {
                expected: self.manifest_digest.clone(),
                actual: corpus.manifest_digest().to_string(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("split serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), SplitError> {
        fs::write(path, self.to_json()).map_err(|e| SplitError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<CorpusSplit, SplitError> {
        let err = |reason: String| SplitError::File {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}
