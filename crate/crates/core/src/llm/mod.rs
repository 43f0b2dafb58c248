//! Chat-completion client with a content-addressed response cache.
//!
//! Requests are hashed over a canonical JSON serialization of every field;
//! the hash names the cache file. The replay backend reads the same file
//! format from a fixture directory, so a cache directory from a live run can
//! be replayed offline unchanged.

mod cache;
#[cfg(feature = "http")]
mod http;
mod wire;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, CachedResponse, ResponseCache, CACHE_SCHEMA};
#[cfg(feature = "http")]
pub use http::HttpBackend;
pub use wire::{chat_completion_body, parse_chat_completion};

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
}

impl DecodeParams {
    /// Temperature 0, top-p 1.
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0 && self.top_p == 1.0
    }
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self::greedy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system: String,
    pub user: String,
    pub params: DecodeParams,
}

impl ChatRequest {
    pub fn new(
        model_id: impl Into<String>,
        system: impl Into<String>,
        user: impl Into<String>,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            system: system.into(),
            user: user.into(),
            params: DecodeParams::greedy(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form (fields in declaration order).
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        sha256_hex(canonical.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Replay,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub backend: BackendKind,
    pub latency_ms: u64,
    pub request_hash: String,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend refused the request: {0}")]
    BackendRefused(String),
    #[error("no replay fixture for request {0}")]
    MissingFixture(String),
    #[error("cache entry {0} is corrupt: {1}")]
    CacheCorrupt(String, String),
    #[error(
        "request uses temperature {temperature} / top_p {top_p} but greedy decoding is enforced"
    )]
    NotGreedy { temperature: f64, top_p: f64 },
    #[error("cache I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Something that can answer a chat request with text.
pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError>;
}

/// Serves fixture files (cache format) keyed by request hash.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    fixtures: ResponseCache,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        Self {
            fixtures: ResponseCache::new(dir),
        }
    }
}

impl ChatBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let key = req.cache_key();
        match self.fixtures.get(&key)? {
            Some(entry) => Ok(entry.response.text),
            None => Err(LlmError::MissingFixture(key)),
        }
    }
}

/// Counting semaphore bounding concurrent backend calls.
#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    /// Retries after the first attempt; RateLimited surfaces after these.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << attempt.min(16))
            .min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientCounters {
    pub cache_hits: usize,
    pub backend_calls: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarmSummary {
    pub hits: usize,
    pub misses: usize,
    pub fetched: usize,
    pub failed: usize,
}

/// Shareable client: cache first, then at most one in-flight backend call
/// per request hash, bounded overall by a semaphore.
pub struct LlmClient {
    backend: Box<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    limiter: Semaphore,
    concurrency: usize,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    retry: RetryPolicy,
    strict_greedy: bool,
    cache_hits: AtomicUsize,
    backend_calls: AtomicUsize,
}

impl LlmClient {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self {
            backend,
            cache: None,
            limiter: Semaphore::new(DEFAULT_CONCURRENCY),
            concurrency: DEFAULT_CONCURRENCY,
            inflight: Mutex::new(HashMap::new()),
            retry: RetryPolicy::default(),
            strict_greedy: false,
            cache_hits: AtomicUsize::new(0),
            backend_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_concurrency(mut self, permits: usize) -> Self {
        self.concurrency = permits.max(1);
        self.limiter = Semaphore::new(self.concurrency);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Reject non-greedy requests before dispatch.
    pub fn strict_greedy(mut self, strict: bool) -> Self {
        self.strict_greedy = strict;
        self
    }

    pub fn concurrency(&self) -> usize {
        self.concurrency
    }

    pub fn counters(&self) -> ClientCounters {
        ClientCounters {
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
            backend_calls: self.backend_calls.load(Ordering::Relaxed),
        }
    }

    fn cached(&self, key: &str) -> Result<Option<String>, LlmError> {
        match &self.cache {
            Some(cache) => Ok(cache.get(key)?.map(|e| e.response.text)),
            None => Ok(None),
        }
    }

    pub fn chat(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if self.strict_greedy && !req.params.is_greedy() {
            return Err(LlmError::NotGreedy {
                temperature: req.params.temperature,
                top_p: req.params.top_p,
            });
        }
        let start = Instant::now();
        let key = req.cache_key();
        let respond = |text: String, backend: BackendKind| ChatResponse {
            text,
            backend,
            latency_ms: start.elapsed().as_millis() as u64,
            request_hash: key.clone(),
        };

        if let Some(text) = self.cached(&key)? {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(respond(text, BackendKind::Cache));
        }

        let slot = {
            let mut map = self.inflight.lock().unwrap();
            map.entry(key.clone()).or_default().clone()
        };
        let result = {
            let _guard = slot.lock().unwrap();
            // A coalesced caller finds the leader's answer in the cache.
            if let Some(text) = self.cached(&key)? {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                Ok(respond(text, BackendKind::Cache))
            } else {
                self.dispatch(req).and_then(|text| {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, req, &text)?;
                    }
                    Ok(respond(text, self.backend.kind()))
                })
            }
        };
        {
            let mut map = self.inflight.lock().unwrap();
            if Arc::strong_count(&slot) <= 2 {
                map.remove(&key);
            }
        }
        result
    }

    fn dispatch(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let _permit = self.limiter.acquire();
        let mut attempt = 0;
        loop {
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            match self.backend.complete(req) {
                Err(LlmError::RateLimited(msg)) if attempt < self.retry.max_retries => {
                    let wait = self.retry.delay(attempt);
                    log::warn!("rate limited ({msg}); retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    /// Fills the cache for every request, with at most `concurrency`
    /// backend calls in flight. Running it twice fetches nothing new.
    pub fn warm_cache(&self, requests: &[ChatRequest]) -> WarmSummary {
        let hits = AtomicUsize::new(0);
        let fetched = AtomicUsize::new(0);
        let failed = AtomicUsize::new(0);
        let next = AtomicUsize::new(0);
        let workers = self.concurrency.min(requests.len()).max(1);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = requests.get(i) else { break };
                    match self.chat(req) {
                        Ok(r) if r.backend == BackendKind::Cache => {
                            hits.fetch_add(1, Ordering::Relaxed);
                        }
                        Ok(_) => {
                            fetched.fetch_add(1, Ordering::Relaxed);
                        }
                        Err(e) => {
                            log::warn!("warm-cache: {e}");
                            failed.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                });
            }
        });
        let hits = hits.into_inner();
        WarmSummary {
            hits,
            misses: requests.len() - hits,
            fetched: fetched.into_inner(),
            failed: failed.into_inner(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    struct Echo {
        calls: Arc<AtomicUsize>,
        delay: Duration,
    }

    impl ChatBackend for Echo {
        fn kind(&self) -> BackendKind {
            BackendKind::Http
        }
        fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(self.delay);
            Ok(format!("echo: {}", req.user))
        }
    }

    struct Flaky {
        failures_left: AtomicU32,
    }

    impl ChatBackend for Flaky {
        fn kind(&self) -> BackendKind {
            BackendKind::Http
        }
        fn complete(&self, _req: &ChatRequest) -> Result<String, LlmError> {
            if self
                .failures_left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                Err(LlmError::RateLimited("429".into()))
            } else {
                Ok("ok".into())
            }
        }
    }

    fn fast_retry(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(4),
        }
    }

    #[test]
    fn cache_key_covers_every_field() {
        let base = ChatRequest::new("m", "sys", "user");
        let mut other = base.clone();
        other.params.max_output_tokens = 10;
        assert_ne!(base.cache_key(), other.cache_key());
        let mut other = base.clone();
        other.model_id = "n".into();
        assert_ne!(base.cache_key(), other.cache_key());
        assert_eq!(base.cache_key(), base.clone().cache_key());
        assert_eq!(base.cache_key().len(), 64);
    }

    #[test]
    fn strict_greedy_rejects_before_dispatch() {
        let calls = Arc::new(AtomicUsize::new(0));
        let client = LlmClient::new(Box::new(Echo {
            calls: calls.clone(),
            delay: Duration::ZERO,
        }))
        .strict_greedy(true);
        let mut req = ChatRequest::new("m", "s", "u");
        req.params.temperature = 0.7;
        assert!(matches!(client.chat(&req), Err(LlmError::NotGreedy { .. })));
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn rate_limits_are_retried_then_surfaced() {
        let client = LlmClient::new(Box::new(Flaky {
            failures_left: AtomicU32::new(2),
        }))
        .with_retry(fast_retry(3));
        assert_eq!(
            client.chat(&ChatRequest::new("m", "s", "u")).unwrap().text,
            "ok"
        );
        assert_eq!(client.counters().backend_calls, 3);

        let client = LlmClient::new(Box::new(Flaky {
            failures_left: AtomicU32::new(10),
        }))
        .with_retry(fast_retry(2));
        assert!(matches!(
            client.chat(&ChatRequest::new("m", "s", "u")),
            Err(LlmError::RateLimited(_))
        ));
        assert_eq!(client.counters().backend_calls, 3);
    }

    #[test]
    fn concurrent_identical_requests_coalesce() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let client = LlmClient::new(Box::new(Echo {
            calls: calls.clone(),
            delay: Duration::from_millis(30),
        }))
        .with_cache(ResponseCache::new(dir.path()))
        .with_concurrency(8);
        let req = ChatRequest::new("m", "s", "same");
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| assert_eq!(client.chat(&req).unwrap().text, "echo: same"));
            }
        });
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn warm_cache_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Arc::new(AtomicUsize::new(0));
        let client = LlmClient::new(Box::new(Echo {
            calls: calls.clone(),
            delay: Duration::ZERO,
        }))
        .with_cache(ResponseCache::new(dir.path()))
        .with_concurrency(3);
        let reqs: Vec<_> = (0..10)
            .map(|i| ChatRequest::new("m", "s", format!("u{i}")))
            .collect();
        let first = client.warm_cache(&reqs);
        assert_eq!(
            first,
            WarmSummary {
                hits: 0,
                misses: 10,
                fetched: 10,
                failed: 0
            }
        );
        let second = client.warm_cache(&reqs);
        assert_eq!(second.hits, 10);
        assert_eq!(second.fetched, 0);
        assert_eq!(calls.load(Ordering::SeqCst), 10);
    }
}
