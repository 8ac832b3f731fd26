//! Content-addressed cache for generation replies.
//!
//! Keyed by the SHA-256 of `(model id, prompt)`, so re-running the offline
//! stage with an unchanged corpus and prompts never re-calls the provider.
//! Entries are written once via temp-file-and-rename, which keeps concurrent
//! writers of the same key safe: both produce a complete file.

use std::fs;
use std::io;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    model_id: String,
    raw: String,
}

#[derive(Debug, Clone)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn key(model_id: &str, prompt: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model_id.as_bytes());
        hasher.update([0]);
        hasher.update(prompt.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// Returns the cached raw reply for `(model_id, prompt)`, if present.
    pub fn get(&self, model_id: &str, prompt: &str) -> Option<String> {
        let path = self.path_for(&Self::key(model_id, prompt));
        let content = fs::read_to_string(path).ok()?;
        let entry: CacheEntry = serde_json::from_str(&content).ok()?;
        Some(entry.raw)
    }

    /// Stores a raw reply. First write wins; a concurrent duplicate write of
    /// the same key lands identical bytes.
    pub fn put(&self, model_id: &str, prompt: &str, raw: &str) -> io::Result<()> {
        let key = Self::key(model_id, prompt);
        let path = self.path_for(&key);
        fs::create_dir_all(path.parent().expect("cache entry has parent"))?;
        let entry = CacheEntry {
            model_id: model_id.to_string(),
            raw: raw.to_string(),
        };
        let tmp = path.with_extension(format!(
            "tmp.{}.{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(
            &tmp,
            serde_json::to_vec(&entry).expect("cache entry serializes"),
        )?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}
