//! Vision-language chat client: rate limiting, retries with backoff,
//! response caching, and the zero-shot classification protocol.

pub mod cache;
pub mod limiter;
pub mod provider;
pub mod zeroshot;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net;
use crate::util::sha256_hex;

pub use cache::{CachedResponse, ResponseCache};
pub use limiter::{Clock, RateLimiter, SystemClock};
pub use provider::{build_call, HttpCall, ProviderKind};
pub use zeroshot::{
    parse_zeroshot, render_zeroshot_prompt, zeroshot_classify, ZeroShotOutcome,
    ZEROSHOT_MAX_TOKENS, ZEROSHOT_PROMPT_VERSION, ZEROSHOT_TEMPLATE,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub bytes: Vec<u8>,
    pub media_type: String,
}

impl ImagePayload {
    /// Sniffs the media type; fails for bytes that are not a known raster format.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, GatewayError> {
        let format = image::guess_format(&bytes)
            .map_err(|e| GatewayError::InvalidRequest(format!("image: {e}")))?;
        Ok(Self {
            media_type: format.to_mime_type().to_string(),
            bytes,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VlmRequest {
    pub model_id: String,
    pub prompt_version: String,
    pub prompt_text: String,
    pub image: Option<ImagePayload>,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl VlmRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidRequest(m.to_string()));
        if self.prompt_text.is_empty() {
            return bad("prompt text is empty");
        }
        if self.model_id.is_empty() {
            return bad("model id is empty");
        }
        if self.max_output_tokens == 0 {
            return bad("max output tokens must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be a non-negative number");
        }
        if let Some(img) = &self.image {
            if image::guess_format(&img.bytes).is_err() {
                return bad("image is not a supported raster format");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Filtered,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VlmResponse {
    /// Provider text, byte-for-byte.
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
    pub metadata: BTreeMap<String, String>,
    pub attempts: u32,
    pub from_cache: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub backoff_initial: Duration,
    pub backoff_multiplier: f64,
    #[serde(with = "millis")]
    pub backoff_cap: Duration,
    pub requests_per_minute: u32,
    /// Length of the rate window; one minute outside of tests.
    #[serde(with = "millis")]
    pub rate_window: Duration,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
    /// Serve only from cache; a miss is an error instead of a network call.
    pub offline: bool,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for GatewayPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            backoff_initial: Duration::from_millis(1000),
            backoff_multiplier: 2.0,
            backoff_cap: Duration::from_secs(60),
            requests_per_minute: 60,
            rate_window: Duration::from_secs(60),
            timeout: Duration::from_secs(120),
            cache_dir: None,
            offline: false,
        }
    }
}

impl GatewayPolicy {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.requests_per_minute == 0 {
            return Err(GatewayError::Config("requests_per_minute must be positive".into()));
        }
        if !(self.backoff_multiplier >= 1.0 && self.backoff_multiplier.is_finite()) {
            return Err(GatewayError::Config("backoff_multiplier must be >= 1".into()));
        }
        Ok(())
    }

    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = self.backoff_multiplier.powi(retry.saturating_sub(1) as i32);
        let secs = self.backoff_initial.as_secs_f64() * factor;
        Duration::from_secs_f64(secs.min(self.backoff_cap.as_secs_f64()))
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("authentication failed (HTTP {status}): {body}")]
    Auth { status: u16, body: String },
    #[error("request rejected (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("gave up after {attempts} attempt(s): {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
    #[error("offline mode and no cached response for key {0}")]
    CacheMiss(String),
}

impl GatewayError {
    /// Short machine-readable class for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::InvalidRequest(_) => "invalid_request",
            GatewayError::Config(_) => "config",
            GatewayError::Auth { .. } => "auth",
            GatewayError::Rejected { .. } => "rejected",
            GatewayError::RetriesExhausted { .. } => "retries_exhausted",
            GatewayError::Cache(_) => "cache",
            GatewayError::CacheMiss(_) => "cache_miss",
        }
    }
}

fn push_part(buf: &mut Vec<u8>, part: &[u8]) {
    buf.extend_from_slice(&(part.len() as u64).to_le_bytes());
    buf.extend_from_slice(part);
}

/// Content hash over model, prompt version, prompt text and image hash.
/// Parts are length-prefixed so no two distinct tuples collide by
/// concatenation.
pub fn cache_key(req: &VlmRequest) -> String {
    let image_hash = req
        .image
        .as_ref()
        .map(|i| sha256_hex(&i.bytes))
        .unwrap_or_default();
    let mut buf = Vec::new();
    for part in [
        req.model_id.as_bytes(),
        req.prompt_version.as_bytes(),
        req.prompt_text.as_bytes(),
        image_hash.as_bytes(),
    ] {
        push_part(&mut buf, part);
    }
    sha256_hex(&buf)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub api_base: String,
    pub api_key: Option<String>,
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind, api_base: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            kind,
            api_base: api_base.into(),
            api_key,
        }
    }

    /// Reads `UNITE_PROVIDER`, `UNITE_API_KEY` and `UNITE_API_BASE`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let kind: ProviderKind = std::env::var("UNITE_PROVIDER")
            .unwrap_or_else(|_| "gemini".into())
            .parse()
            .map_err(GatewayError::Config)?;
        let api_base = std::env::var("UNITE_API_BASE").unwrap_or_else(|_| kind.default_base().into());
        let api_key = std::env::var("UNITE_API_KEY").ok().filter(|k| !k.is_empty());
        Ok(Self::new(kind, api_base, api_key))
    }

    pub fn id(&self) -> String {
        format!("{}@{}", serde_json::to_value(self.kind).unwrap().as_str().unwrap(), self.api_base)
    }
}

pub struct Gateway {
    provider: ProviderConfig,
    policy: GatewayPolicy,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    cache: Option<ResponseCache>,
    agent: ureq::Agent,
    network_calls: AtomicUsize,
}

enum Attempt {
    Done(VlmResponse),
    Retry(String, Option<Duration>),
    Fail(GatewayError),
}

impl Gateway {
    pub fn new(provider: ProviderConfig, policy: GatewayPolicy) -> Result<Self, GatewayError> {
        Self::with_clock(provider, policy, Arc::new(SystemClock))
    }

    pub fn with_clock(
        provider: ProviderConfig,
        policy: GatewayPolicy,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, GatewayError> {
        policy.validate()?;
        let cache = match &policy.cache_dir {
            Some(dir) => Some(ResponseCache::open(dir)?),
            None => None,
        };
        Ok(Self {
            limiter: RateLimiter::with_clock(policy.requests_per_minute, policy.rate_window, clock.clone()),
            agent: net::agent(policy.timeout),
            provider,
            policy,
            clock,
            cache,
            network_calls: AtomicUsize::new(0),
        })
    }

    pub fn provider(&self) -> &ProviderConfig {
        &self.provider
    }

    pub fn policy(&self) -> &GatewayPolicy {
        &self.policy
    }

    /// HTTP attempts made so far, across all calls.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    /// Sends one request, serving from cache when possible. Safe to call from
    /// many threads; all of them share one rate window.
    pub fn complete(&self, req: &VlmRequest) -> Result<VlmResponse, GatewayError> {
        req.validate()?;
        let key = cache_key(req);
        if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            return Ok(VlmResponse {
                text: hit.text,
                finish_reason: hit.finish_reason,
                latency_ms: 0,
                metadata: BTreeMap::from([("cache_key".to_string(), key)]),
                attempts: 0,
                from_cache: true,
            });
        }

        if self.policy.offline {
            return Err(GatewayError::CacheMiss(key));
        }
        let call = build_call(
            self.provider.kind,
            &self.provider.api_base,
            self.provider.api_key.as_deref(),
            req,
        );
        let mut last = String::new();
        for attempt in 1..=self.policy.max_retries + 1 {
            self.limiter.acquire();
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match self.attempt(&call, attempt) {
                Attempt::Done(mut resp) => {
                    resp.metadata.insert("cache_key".into(), key.clone());
                    if resp.finish_reason != FinishReason::Filtered {
                        if let Some(cache) = &self.cache {
                            cache.put(&CachedResponse {
                                key: key.clone(),
                                model_id: req.model_id.clone(),
                                prompt_version: req.prompt_version.clone(),
                                text: resp.text.clone(),
                                finish_reason: resp.finish_reason,
                            })?;
                        }
                    }
                    return Ok(resp);
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(reason, retry_after) => {
                    log::warn!("attempt {attempt} for {}: {reason}", req.model_id);
                    last = reason;
                    if attempt <= self.policy.max_retries {
                        let mut wait = self.policy.backoff(attempt);
                        if let Some(ra) = retry_after {
                            wait = wait.max(ra.min(self.policy.backoff_cap));
                        }
                        self.clock.sleep(wait);
                    }
                }
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts: self.policy.max_retries + 1,
            last,
        })
    }

    fn attempt(&self, call: &HttpCall, attempt: u32) -> Attempt {
        let started = Instant::now();
        let mut builder = self.agent.post(&call.url);
        for (k, v) in &call.headers {
            builder = builder.header(k, v);
        }
        let mut resp = match builder.send(&call.body[..]) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}"), None),
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let body = match resp
            .body_mut()
            .with_config()
            .limit(net::MAX_BODY_BYTES)
            .read_to_string()
        {
            Ok(b) => b,
            Err(e) => return Attempt::Retry(format!("reading body: {e}"), None),
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        let done = |text: String, finish_reason| {
            Attempt::Done(VlmResponse {
                text,
                finish_reason,
                latency_ms,
                metadata: BTreeMap::from([("http_status".to_string(), status.to_string())]),
                attempts: attempt,
                from_cache: false,
            })
        };
        match status {
            200..=299 => match provider::decode_success(self.provider.kind, &body) {
                Ok(d) => done(d.text, d.finish_reason),
                Err(e) => Attempt::Retry(format!("malformed response: {e}"), None),
            },
            401 | 403 => Attempt::Fail(GatewayError::Auth { status, body }),
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}"), retry_after),
            400 if provider::is_content_filter_error(&body) => done(String::new(), FinishReason::Filtered),
            _ => Attempt::Fail(GatewayError::Rejected { status, body }),
        }
    }
}
