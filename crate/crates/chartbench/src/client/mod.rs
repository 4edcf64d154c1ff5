//! Querying multimodal model endpoints with chart images.
//!
//! One logical request per (item, endpoint, prompt variant) at temperature
//! 0. Transient failures (rate limits, timeouts, 5xx, connection errors) are
//! retried on the configured backoff schedule; authentication failures are
//! not. Every outcome is stored verbatim as a [`PredictionRecord`].

mod store;
mod transport;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use base64::Engine;
use chartbench_core::prompt::{build_prompt, PromptVariant};
use chartbench_core::BenchmarkItem;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use store::{load_successful, PredictionStore};
pub use transport::{HttpRequest, HttpResponse, MockTransport, Transport, TransportError, UreqTransport};

use crate::io::{now_rfc3339, FailureKind, PredictionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestShape {
    /// `POST {base_url}/chat/completions` with a data-URL image part.
    OpenaiChat,
    /// `POST {base_url}/models/{model}:generateContent` with inline data.
    Gemini,
    /// `POST {base_url}` as multipart form: `model`, `prompt`,
    /// `temperature`, `max_tokens` and an `image` file.
    GenericMultipart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Wait before retry `k` is `backoff_ms[min(k, len - 1)]`.
    pub backoff_ms: Vec<u64>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            backoff_ms: vec![2_000, 8_000, 30_000],
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        let ms = self
            .backoff_ms
            .get(retry as usize)
            .or(self.backoff_ms.last())
            .copied()
            .unwrap_or(0);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub name: String,
    pub base_url: String,
    /// Environment variable holding the API key; secrets never live in the
    /// file itself.
    #[serde(default)]
    pub auth_env: Option<String>,
    pub model_id: String,
    pub request_shape: RequestShape,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    /// Requests per minute; `None` means unlimited.
    #[serde(default)]
    pub rate_limit: Option<u32>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

fn default_max_tokens() -> u32 {
    2048
}

fn default_timeout() -> u64 {
    120
}

fn default_concurrency() -> usize {
    1
}

impl EndpointConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = crate::io::read_config(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            bail!("base_url must be an http(s) URL, got {:?}", self.base_url);
        }
        if self.model_id.trim().is_empty() {
            bail!("model_id is empty");
        }
        if self.retry.max_attempts == 0 {
            bail!("retry.max_attempts must be at least 1");
        }
        if self.rate_limit == Some(0) {
            bail!("rate_limit must be positive when set");
        }
        if self.concurrency == 0 {
            bail!("concurrency must be at least 1");
        }
        Ok(())
    }

    /// Reads the API key from the configured environment variable.
    pub fn resolve_key(&self) -> Result<Option<String>> {
        match &self.auth_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .with_context(|| format!("environment variable {var} is not set")),
        }
    }
}

/// Builds the HTTP request for one prompt and PNG image.
pub fn build_request(cfg: &EndpointConfig, key: Option<&str>, prompt: &str, png: &[u8]) -> HttpRequest {
    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
    let base = cfg.base_url.trim_end_matches('/');
    let mut headers = Vec::new();
    match cfg.request_shape {
        RequestShape::OpenaiChat => {
            if let Some(k) = key {
                headers.push(("Authorization".into(), format!("Bearer {k}")));
            }
            headers.push(("Content-Type".into(), "application/json".into()));
            let body = json!({
                "model": cfg.model_id,
                "temperature": cfg.temperature,
                "max_tokens": cfg.max_output_tokens,
                "messages": [{
                    "role": "user",
                    "content": [
                        {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}},
                        {"type": "text", "text": prompt},
                    ],
                }],
            });
            HttpRequest {
                url: format!("{base}/chat/completions"),
                headers,
                body: body.to_string().into_bytes(),
            }
        }
        RequestShape::Gemini => {
            if let Some(k) = key {
                headers.push(("x-goog-api-key".into(), k.to_string()));
            }
            headers.push(("Content-Type".into(), "application/json".into()));
            let body = json!({
                "contents": [{
                    "role": "user",
                    "parts": [
                        {"inline_data": {"mime_type": "image/png", "data": b64}},
                        {"text": prompt},
                    ],
                }],
                "generationConfig": {
                    "temperature": cfg.temperature,
                    "maxOutputTokens": cfg.max_output_tokens,
                },
            });
            HttpRequest {
                url: format!("{base}/models/{}:generateContent", cfg.model_id),
                headers,
                body: body.to_string().into_bytes(),
            }
        }
        RequestShape::GenericMultipart => {
            if let Some(k) = key {
                headers.push(("Authorization".into(), format!("Bearer {k}")));
            }
            let boundary = multipart_boundary(png, prompt);
            headers.push(("Content-Type".into(), format!("multipart/form-data; boundary={boundary}")));
            let mut body = Vec::new();
            let text_part = |body: &mut Vec<u8>, name: &str, value: &str| {
                body.extend_from_slice(
                    format!("--{boundary}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n")
                        .as_bytes(),
                );
            };
            text_part(&mut body, "model", &cfg.model_id);
            text_part(&mut body, "prompt", prompt);
            text_part(&mut body, "temperature", &cfg.temperature.to_string());
            text_part(&mut body, "max_tokens", &cfg.max_output_tokens.to_string());
            body.extend_from_slice(
                format!(
                    "--{boundary}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"chart.png\"\r\n\
                     Content-Type: image/png\r\n\r\n"
                )
                .as_bytes(),
            );
            body.extend_from_slice(png);
            body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
            HttpRequest {
                url: base.to_string(),
                headers,
                body,
            }
        }
    }
}

/// A boundary that does not occur in the payload.
fn multipart_boundary(png: &[u8], prompt: &str) -> String {
    let mut n = 0u32;
    loop {
        let b = format!("chartbench-boundary-{n:08x}");
        let needle = b.as_bytes();
        if !png.windows(needle.len()).any(|w| w == needle) && !prompt.contains(&b) {
            return b;
        }
        n += 1;
    }
}

/// Pulls the generated text out of a successful response body.
pub fn extract_text(shape: RequestShape, body: &[u8]) -> Option<String> {
    let parsed: Option<Value> = serde_json::from_slice(body).ok();
    match shape {
        RequestShape::OpenaiChat => {
            let content = &parsed?["choices"][0]["message"]["content"];
            match content {
                Value::String(s) => Some(s.clone()),
                // Content given as a list of typed parts.
                Value::Array(parts) => Some(
                    parts
                        .iter()
                        .filter_map(|p| p["text"].as_str())
                        .collect::<Vec<_>>()
                        .join(""),
                ),
                _ => None,
            }
        }
        RequestShape::Gemini => {
            let parts = parsed?["candidates"][0]["content"]["parts"].as_array()?.clone();
            Some(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join(""))
        }
        RequestShape::GenericMultipart => match parsed {
            Some(v) => ["text", "output", "response", "generated_text"]
                .iter()
                .find_map(|k| v[*k].as_str().map(String::from))
                .or_else(|| v.as_str().map(String::from)),
            None => String::from_utf8(body.to_vec()).ok(),
        },
    }
}

/// Maps an HTTP status to a failure class; `None` for success.
pub fn classify_status(status: u16) -> Option<FailureKind> {
    match status {
        200..=299 => None,
        401 | 403 => Some(FailureKind::Auth),
        429 => Some(FailureKind::Quota),
        408 | 504 => Some(FailureKind::Timeout),
        500..=599 => Some(FailureKind::Server),
        _ => Some(FailureKind::Client),
    }
}

fn is_retryable(kind: FailureKind) -> bool {
    matches!(
        kind,
        FailureKind::Quota | FailureKind::Timeout | FailureKind::Server | FailureKind::Transport
    )
}

/// Spaces request starts at least `60 / rpm` seconds apart across threads.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(per_minute: Option<u32>) -> Self {
        let interval = per_minute.map_or(Duration::ZERO, |r| Duration::from_secs_f64(60.0 / f64::from(r)));
        Self {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until the caller may start a request.
    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let start = next.map_or(now, |n| n.max(now));
            *next = Some(start + self.interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

pub struct Client {
    pub config: EndpointConfig,
    transport: Box<dyn Transport>,
    key: Option<String>,
    limiter: RateLimiter,
    sleep: fn(Duration),
}

impl Client {
    pub fn new(config: EndpointConfig, transport: Box<dyn Transport>, key: Option<String>) -> Self {
        let limiter = RateLimiter::new(config.rate_limit);
        Self {
            config,
            transport,
            key,
            limiter,
            sleep: std::thread::sleep,
        }
    }

    /// An HTTP client for `config`, reading the key from the environment.
    pub fn from_config(config: EndpointConfig) -> Result<Self> {
        let key = config.resolve_key()?;
        let transport = UreqTransport::new(Duration::from_secs(config.timeout_secs));
        Ok(Self::new(config, Box::new(transport), key))
    }

    /// Replaces the backoff sleep (tests use a no-op).
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn model(&self) -> &str {
        &self.config.model_id
    }

    /// Queries one item and returns the record to store, successful or not.
    pub fn query_item(&self, item: &BenchmarkItem, variant: PromptVariant, png: &[u8]) -> PredictionRecord {
        let mut record = PredictionRecord {
            item_id: item.id.clone(),
            model: self.config.model_id.clone(),
            prompt_variant: variant,
            raw_text: String::new(),
            timestamp: now_rfc3339(),
            attempts: 0,
            error: None,
            error_message: None,
        };
        let prompt = match build_prompt(item, variant) {
            Ok(p) => p,
            Err(e) => {
                record.error = Some(FailureKind::MissingInput);
                record.error_message = Some(e.to_string());
                return record;
            }
        };
        let request = build_request(&self.config, self.key.as_deref(), &prompt, png);
        let retry = &self.config.retry;
        for attempt in 1..=retry.max_attempts {
            if attempt > 1 {
                (self.sleep)(retry.delay_before_retry(attempt - 2));
            }
            self.limiter.acquire();
            record.attempts = attempt;
            record.timestamp = now_rfc3339();
            let (kind, message) = match self.transport.post(&request) {
                Ok(resp) => match classify_status(resp.status) {
                    None => match extract_text(self.config.request_shape, &resp.body) {
                        Some(text) => {
                            record.raw_text = text;
                            record.error = None;
                            record.error_message = None;
                            return record;
                        }
                        None => (FailureKind::BadResponse, "response has no generated text".to_string()),
                    },
                    Some(kind) => (kind, format!("HTTP {}: {}", resp.status, snippet(&resp.body))),
                },
                Err(TransportError::Timeout) => (FailureKind::Timeout, "request timed out".to_string()),
                Err(e) => (FailureKind::Transport, e.to_string()),
            };
            record.error = Some(kind);
            record.error_message = Some(message);
            if !is_retryable(kind) {
                break;
            }
        }
        record
    }
}

fn snippet(body: &[u8]) -> String {
    let s = String::from_utf8_lossy(body);
    s.chars().take(200).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub succeeded: usize,
    pub failed: usize,
    pub skipped: usize,
}

/// Where item images live: `image_ref` resolved against `base_dir`.
pub fn image_path(item: &BenchmarkItem, base_dir: &Path) -> Option<PathBuf> {
    let r = Path::new(item.image_ref.as_deref()?);
    Some(if r.is_absolute() { r.to_path_buf() } else { base_dir.join(r) })
}

/// Queries every item not yet completed in `store`, with up to
/// `config.concurrency` requests in flight.
pub fn run_batch(
    client: &Client,
    items: &[&BenchmarkItem],
    variant: PromptVariant,
    image_base: &Path,
    store: &PredictionStore,
) -> Result<BatchSummary> {
    let next = AtomicUsize::new(0);
    let summary = Mutex::new(BatchSummary::default());
    let first_error: Mutex<Option<anyhow::Error>> = Mutex::new(None);
    let workers = client.config.concurrency.max(1).min(items.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if first_error.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { return };
                if store.contains(&item.id, client.model(), variant) {
                    summary.lock().unwrap().skipped += 1;
                    continue;
                }
                let record = match image_path(item, image_base).map(|p| std::fs::read(&p).map_err(|e| (p, e))) {
                    Some(Ok(png)) => client.query_item(item, variant, &png),
                    other => {
                        let message = match other {
                            Some(Err((p, e))) => format!("cannot read image {}: {e}", p.display()),
                            _ => "item has no rendered image".to_string(),
                        };
                        PredictionRecord {
                            item_id: item.id.clone(),
                            model: client.model().to_string(),
                            prompt_variant: variant,
                            raw_text: String::new(),
                            timestamp: now_rfc3339(),
                            attempts: 0,
                            error: Some(FailureKind::MissingInput),
                            error_message: Some(message),
                        }
                    }
                };
                let ok = record.succeeded();
                match store.append(&record) {
                    Ok(_) => {
                        let mut s = summary.lock().unwrap();
                        if ok {
                            s.succeeded += 1;
                        } else {
                            s.failed += 1;
                        }
                    }
                    Err(e) => {
                        first_error.lock().unwrap().get_or_insert(e);
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e.context(format!("writing {}", store.path().display())));
    }
    Ok(summary.into_inner().unwrap())
}
