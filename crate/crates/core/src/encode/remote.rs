//! Client for an external sentence-encoder service.
//!
//! Wire contract: `POST {texts: [string]}` answered by `{vectors: [[number]]}`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{EncodeError, VectorSet};

#[derive(Debug, Error)]
pub enum TransportError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

pub trait EncoderTransport: Sync {
    fn encode(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError>;
}

#[derive(Serialize)]
struct EncodeRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EncodeResponse {
    vectors: Vec<Vec<f64>>,
}

/// JSON-over-HTTP transport.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { agent, url: url.into() }
    }
}

impl EncoderTransport for HttpTransport {
    fn encode(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, TransportError> {
        let mut response = self.agent.post(&self.url).send_json(EncodeRequest { texts }).map_err(classify)?;
        let body: EncodeResponse = response.body_mut().read_json().map_err(classify)?;
        Ok(body.vectors)
    }
}

fn classify(err: ureq::Error) -> TransportError {
    match err {
        ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
            TransportError::Transient(format!("HTTP status {code}"))
        }
        ureq::Error::StatusCode(code) => TransportError::Fatal(format!("HTTP status {code}")),
        ureq::Error::Json(e) => TransportError::Fatal(format!("invalid response body: {e}")),
        other => TransportError::Transient(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchConfig {
    pub batch_size: usize,
    /// Retries per batch after the first attempt.
    pub max_retries: usize,
    pub max_in_flight: usize,
    pub retry_backoff_ms: u64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self { batch_size: 64, max_retries: 3, max_in_flight: 4, retry_backoff_ms: 200 }
    }
}

type BatchResult = Result<Vec<Vec<f64>>, String>;

/// Batches, deduplicates and caches encoder requests. Identical texts map
/// to the same cached vector for the lifetime of the fetcher.
pub struct EmbeddingFetcher<T> {
    transport: T,
    config: FetchConfig,
    cache: Mutex<HashMap<[u8; 32], Vec<f64>>>,
}

fn text_key(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

impl<T: EncoderTransport> EmbeddingFetcher<T> {
    pub fn new(transport: T, config: FetchConfig) -> Self {
        Self { transport, config, cache: Mutex::new(HashMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn fetch(&self, ids: Vec<String>, texts: &[String]) -> Result<VectorSet, EncodeError> {
        if ids.len() != texts.len() {
            return Err(EncodeError::LengthMismatch { ids: ids.len(), vectors: texts.len() });
        }
        let keys: Vec<[u8; 32]> = texts.iter().map(|t| text_key(t)).collect();
        let mut pending: Vec<&String> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            let mut queued = std::collections::HashSet::new();
            for (text, key) in texts.iter().zip(&keys) {
                if !cache.contains_key(key) && queued.insert(*key) {
                    pending.push(text);
                }
            }
        }
        let batches: Vec<Vec<String>> = pending
            .chunks(self.config.batch_size.max(1))
            .map(|chunk| chunk.iter().map(|s| s.to_string()).collect())
            .collect();
        let results = self.run_batches(&batches);

        let mut failed = Vec::new();
        let mut last_error = String::new();
        let mut dim: Option<usize> = self.cache.lock().unwrap().values().next().map(Vec::len);
        let mut fresh = Vec::new();
        for (index, (batch, result)) in batches.iter().zip(results).enumerate() {
            match result {
                Ok(vectors) => {
                    if vectors.len() != batch.len() {
                        return Err(EncodeError::BatchSizeMismatch { expected: batch.len(), found: vectors.len() });
                    }
                    for (text, vector) in batch.iter().zip(vectors) {
                        let expected = *dim.get_or_insert(vector.len());
                        if vector.len() != expected {
                            return Err(EncodeError::EndpointDimensionMismatch { expected, found: vector.len() });
                        }
                        fresh.push((text_key(text), vector));
                    }
                }
                Err(e) => {
                    failed.push(index);
                    last_error = e;
                }
            }
        }
        if !failed.is_empty() {
            return Err(EncodeError::RetriesExhausted {
                failed,
                attempts: self.config.max_retries + 1,
                last_error,
            });
        }
        let mut cache = self.cache.lock().unwrap();
        cache.extend(fresh);
        let rows = keys.iter().map(|k| cache[k].clone()).collect();
        VectorSet::dense(ids, rows)
    }

    fn run_batches(&self, batches: &[Vec<String>]) -> Vec<BatchResult> {
        let slots: Vec<Mutex<Option<BatchResult>>> = batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.max(1).min(batches.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= batches.len() {
                        break;
                    }
                    *slots[i].lock().unwrap() = Some(self.send_with_retries(&batches[i]));
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().unwrap().expect("every batch ran")).collect()
    }

    fn send_with_retries(&self, batch: &[String]) -> BatchResult {
        let mut attempt = 0;
        loop {
            match self.transport.encode(batch) {
                Ok(v) => return Ok(v),
                Err(TransportError::Fatal(msg)) => return Err(msg),
                Err(TransportError::Transient(msg)) => {
                    if attempt >= self.config.max_retries {
                        return Err(msg);
                    }
                    attempt += 1;
                    tracing::warn!(attempt, error = %msg, "encoder request failed; retrying");
                    std::thread::sleep(Duration::from_millis(self.config.retry_backoff_ms * attempt as u64));
                }
            }
        }
    }
}

/// One-shot convenience wrapper around [`EmbeddingFetcher`].
pub fn fetch_embeddings(
    transport: impl EncoderTransport,
    config: FetchConfig,
    ids: Vec<String>,
    texts: &[String],
) -> Result<VectorSet, EncodeError> {
    EmbeddingFetcher::new(transport, config).fetch(ids, texts)
}
