//! Persistent response cache, one file per key.
//!
//! File layout:
//!
//! ```text
//! sastbench-cache 1
//! model_id: gpt-4-1106-preview
//! api_kind: Assistant
//! bytes: 123
//!
//! <raw response text>
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ApiKind, BackendError};

const MAGIC: &str = "sastbench-cache 1";

/// Digest over (model id, api kind, prompt bytes). Each field is length
/// prefixed so no two distinct triples share an encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(model_id: &str, api_kind: ApiKind, prompt: &str) -> Self {
        let mut hasher = Sha256::new();
        for field in [model_id.as_bytes(), api_kind.as_str().as_bytes(), prompt.as_bytes()] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field);
        }
        CacheKey(hex::encode(hasher.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub struct ResponseCache {
    dir: PathBuf,
    locks: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
    tmp_seq: AtomicU64,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| cache_err(&dir, e))?;
        Ok(ResponseCache {
            dir,
            locks: Mutex::new(HashMap::new()),
            tmp_seq: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.txt", key.as_str()))
    }

    /// Per-key mutex. Holding it across lookup, exchange and store keeps
    /// concurrent identical requests down to one exchange.
    pub fn key_lock(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .unwrap()
            .entry(key.clone())
            .or_default()
            .clone()
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<String>, BackendError> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        let text = String::from_utf8_lossy(&bytes);
        let Some((header, body)) = text.split_once("\n\n") else {
            log::warn!("ignoring malformed cache entry {}", path.display());
            return Ok(None);
        };
        if header.lines().next() != Some(MAGIC) {
            log::warn!("ignoring cache entry with unknown header {}", path.display());
            return Ok(None);
        }
        Ok(Some(body.to_string()))
    }

    pub fn put(
        &self,
        key: &CacheKey,
        model_id: &str,
        api_kind: ApiKind,
        text: &str,
    ) -> Result<(), BackendError> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            key.as_str(),
            std::process::id(),
            self.tmp_seq.fetch_add(1, Ordering::Relaxed)
        ));
        let content = format!(
            "{MAGIC}\nmodel_id: {}\napi_kind: {}\nbytes: {}\n\n{text}",
            model_id.replace('\n', " "),
            api_kind.as_str(),
            text.len()
        );
        fs::write(&tmp, content).map_err(|e| cache_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| cache_err(&path, e))
    }

    /// Deletes every cache entry; returns how many were removed.
    pub fn clear(&self) -> Result<usize, BackendError> {
        let mut removed = 0;
        let entries = fs::read_dir(&self.dir).map_err(|e| cache_err(&self.dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| cache_err(&self.dir, e))?;
            let path = entry.path();
            let name = entry.file_name().to_string_lossy().into_owned();
            let is_entry = name.len() == 68 && name.ends_with(".txt");
            if is_entry || name.ends_with(".tmp") {
                fs::remove_file(&path).map_err(|e| cache_err(&path, e))?;
                removed += usize::from(is_entry);
            }
        }
        Ok(removed)
    }
}

fn cache_err(path: &Path, e: std::io::Error) -> BackendError {
    BackendError::Cache(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_separate_every_field() {
        let k = CacheKey::new("m", ApiKind::ChatCompletion, "prompt");
        assert_eq!(k, CacheKey::new("m", ApiKind::ChatCompletion, "prompt"));
        assert_ne!(k, CacheKey::new("m", ApiKind::Assistant, "prompt"));
        assert_ne!(k, CacheKey::new("m2", ApiKind::ChatCompletion, "prompt"));
        assert_ne!(k, CacheKey::new("m", ApiKind::ChatCompletion, "prompt "));
        assert_ne!(
            CacheKey::new("ab", ApiKind::ChatCompletion, "c"),
            CacheKey::new("a", ApiKind::ChatCompletion, "bc")
        );
        assert_eq!(k.as_str().len(), 64);
    }

    #[test]
    fn put_get_clear() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path().join("c")).unwrap();
        let key = CacheKey::new("m", ApiKind::MockReplay, "p");
        assert_eq!(cache.get(&key).unwrap(), None);
        let body = "sqli,3,x\n\nnone,0,y\n";
        cache.put(&key, "m", ApiKind::MockReplay, body).unwrap();
        assert_eq!(cache.get(&key).unwrap().as_deref(), Some(body));
        let raw = fs::read_to_string(cache.dir().join(format!("{key}.txt"))).unwrap();
        assert!(raw.starts_with("sastbench-cache 1\nmodel_id: m\n"));
        assert_eq!(cache.clear().unwrap(), 1);
        assert_eq!(cache.get(&key).unwrap(), None);
    }
}
