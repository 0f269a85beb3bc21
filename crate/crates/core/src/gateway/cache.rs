//! On-disk response cache: one JSON file per key plus a JSONL index.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::FinishReason;
use crate::util::{append_line, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub key: String,
    pub model_id: String,
    pub prompt_version: String,
    pub text: String,
    pub finish_reason: FinishReason,
}

pub struct ResponseCache {
    dir: PathBuf,
    index_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            index_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Unreadable or corrupt entries count as misses.
    pub fn get(&self, key: &str) -> Option<CachedResponse> {
        let bytes = fs::read(self.path(key)).ok()?;
        serde_json::from_slice::<CachedResponse>(&bytes)
            .ok()
            .filter(|c| c.key == key)
    }

    pub fn put(&self, entry: &CachedResponse) -> std::io::Result<()> {
        let body = serde_json::to_vec_pretty(entry).map_err(std::io::Error::other)?;
        write_atomic(&self.path(&entry.key), &body)?;
        let line = serde_json::json!({
            "key": entry.key,
            "model_id": entry.model_id,
            "prompt_version": entry.prompt_version,
        });
        let _g = self.index_lock.lock().unwrap();
        append_line(&self.dir.join("index.jsonl"), &line.to_string())
    }
}
