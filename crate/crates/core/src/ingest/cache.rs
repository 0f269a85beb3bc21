//! Content-addressed image cache with a JSONL manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net;
use crate::util::{append_line, sha256_hex, write_atomic};

const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("image cache I/O at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fetching {url} failed after {attempts} attempt(s): {message}")]
    Network {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("{url} returned HTTP {status}")]
    Http { url: String, status: u16 },
    #[error("{url} is not an image (content type {content_type:?})")]
    NotImage { url: String, content_type: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub url: String,
    pub hash: String,
    pub bytes: u64,
    pub content_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedImage {
    pub path: PathBuf,
    pub hash: String,
    pub from_cache: bool,
}

pub struct ImageCache {
    dir: PathBuf,
    agent: ureq::Agent,
    max_attempts: u32,
    retry_delay: Duration,
    entries: Mutex<HashMap<String, ManifestEntry>>,
    manifest_lock: Mutex<()>,
    url_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    network_fetches: AtomicUsize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FetchError + '_ {
    move |source| FetchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn is_remote(image_ref: &str) -> bool {
    image_ref.starts_with("http://") || image_ref.starts_with("https://")
}

fn sniff_content_type(bytes: &[u8]) -> Option<String> {
    image::guess_format(bytes)
        .ok()
        .map(|f| f.to_mime_type().to_string())
}

impl ImageCache {
    /// Opens (or creates) a cache directory and loads its manifest.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, FetchError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest = dir.join(MANIFEST);
        let mut entries = HashMap::new();
        if manifest.exists() {
            let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                // A torn trailing line from an interrupted run is ignored.
                if let Ok(e) = serde_json::from_str::<ManifestEntry>(line) {
                    if dir.join(&e.hash).exists() {
                        entries.insert(e.url.clone(), e);
                    }
                }
            }
        }
        Ok(Self {
            dir,
            agent: net::agent(Duration::from_secs(60)),
            max_attempts: 3,
            retry_delay: Duration::from_millis(500),
            entries: Mutex::new(entries),
            manifest_lock: Mutex::new(()),
            url_locks: Mutex::new(HashMap::new()),
            network_fetches: AtomicUsize::new(0),
        })
    }

    pub fn with_retries(mut self, max_attempts: u32, delay: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.retry_delay = delay;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of HTTP transfers performed by this instance.
    pub fn network_fetches(&self) -> usize {
        self.network_fetches.load(Ordering::SeqCst)
    }

    pub fn path_for_hash(&self, hash: &str) -> PathBuf {
        self.dir.join(hash)
    }

    pub fn lookup(&self, image_ref: &str) -> Option<ManifestEntry> {
        self.entries.lock().unwrap().get(image_ref).cloned()
    }

    /// Returns the cached file for a URL or local path, downloading on a miss.
    pub fn fetch(&self, image_ref: &str) -> Result<FetchedImage, FetchError> {
        let lock = {
            let mut locks = self.url_locks.lock().unwrap();
            Arc::clone(locks.entry(image_ref.to_string()).or_default())
        };
        let _guard = lock.lock().unwrap();

        if let Some(e) = self.lookup(image_ref) {
            return Ok(FetchedImage {
                path: self.path_for_hash(&e.hash),
                hash: e.hash,
                from_cache: true,
            });
        }

        let (bytes, content_type) = if is_remote(image_ref) {
            self.download(image_ref)?
        } else {
            let path = Path::new(image_ref.strip_prefix("file://").unwrap_or(image_ref));
            let bytes = fs::read(path).map_err(io_err(path))?;
            let ct = sniff_content_type(&bytes).ok_or_else(|| FetchError::NotImage {
                url: image_ref.to_string(),
                content_type: "unknown".into(),
            })?;
            (bytes, ct)
        };
        self.store(image_ref, &bytes, content_type)
    }

    fn store(&self, image_ref: &str, bytes: &[u8], content_type: String) -> Result<FetchedImage, FetchError> {
        let hash = sha256_hex(bytes);
        let path = self.path_for_hash(&hash);
        if !path.exists() {
            write_atomic(&path, bytes).map_err(io_err(&path))?;
        }
        let entry = ManifestEntry {
            url: image_ref.to_string(),
            hash: hash.clone(),
            bytes: bytes.len() as u64,
            content_type,
        };
        {
            let _m = self.manifest_lock.lock().unwrap();
            let manifest = self.dir.join(MANIFEST);
            let line = serde_json::to_string(&entry).expect("manifest entry serializes");
            append_line(&manifest, &line).map_err(io_err(&manifest))?;
        }
        self.entries.lock().unwrap().insert(entry.url.clone(), entry);
        Ok(FetchedImage {
            path,
            hash,
            from_cache: false,
        })
    }

    fn download(&self, url: &str) -> Result<(Vec<u8>, String), FetchError> {
        let mut last = String::new();
        for attempt in 1..=self.max_attempts {
            if attempt > 1 {
                std::thread::sleep(self.retry_delay);
            }
            self.network_fetches.fetch_add(1, Ordering::SeqCst);
            let mut resp = match self.agent.get(url).call() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status().as_u16();
            if status == 429 || status >= 500 {
                last = format!("HTTP {status}");
                continue;
            }
            if status >= 400 {
                return Err(FetchError::Http {
                    url: url.to_string(),
                    status,
                });
            }
            let declared = resp
                .headers()
                .get("content-type")
                .and_then(|v| v.to_str().ok())
                .map(|v| v.split(';').next().unwrap_or("").trim().to_ascii_lowercase())
                .unwrap_or_default();
            let bytes = match resp
                .body_mut()
                .with_config()
                .limit(net::MAX_BODY_BYTES)
                .read_to_vec()
            {
                Ok(b) => b,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let declared_ok = declared.is_empty()
                || declared.starts_with("image/")
                || declared == "application/octet-stream";
            return match (declared_ok, sniff_content_type(&bytes)) {
                (true, Some(sniffed)) => {
                    let ct = if declared.starts_with("image/") { declared } else { sniffed };
                    Ok((bytes, ct))
                }
                _ => Err(FetchError::NotImage {
                    url: url.to_string(),
                    content_type: declared,
                }),
            };
        }
        Err(FetchError::Network {
            url: url.to_string(),
            attempts: self.max_attempts,
            message: last,
        })
    }

    /// Fetches every reference on a pool of `workers` threads; results are
    /// in input order.
    pub fn fetch_all(
        &self,
        refs: &[String],
        workers: usize,
    ) -> Result<Vec<Result<FetchedImage, FetchError>>, FetchError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| FetchError::Pool(e.to_string()))?;
        Ok(pool.install(|| refs.par_iter().map(|r| self.fetch(r)).collect()))
    }
}
