//! HTTP model client with a file cache. One JSON POST per query; responses
//! are cached by query key so re-runs and replays never touch the network.

use crate::detectors::prompt::{MediaItem, Prompt};
use crate::detectors::RemoteSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    text: &'a str,
    media: &'a [MediaItem],
}

#[derive(Deserialize)]
struct ResponseBody {
    text: String,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: serde_json::Value,
    response: serde_json::Value,
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.permits.lock().unwrap() += 1;
        self.gate.available.notify_one();
    }
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

pub(crate) struct RemoteAgent {
    spec: RemoteSpec,
    agent: ureq::Agent,
    token: Option<String>,
    gate: Gate,
    replay: bool,
    tmp_counter: AtomicU64,
}

impl RemoteAgent {
    pub fn new(spec: &RemoteSpec, replay: bool) -> Result<Self> {
        let token = match (&spec.api_key_env, replay) {
            (Some(var), false) => Some(std::env::var(var).map_err(|_| {
                Error::validation(format!(
                    "api_key_env names {var:?} but that environment variable is not set"
                ))
            })?),
            _ => None,
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(spec.timeout_s)))
            .http_status_as_error(false)
            .build();
        std::fs::create_dir_all(&spec.cache_dir)
            .map_err(|e| Error::io(spec.cache_dir.clone(), e))?;
        Ok(RemoteAgent {
            spec: spec.clone(),
            agent: config.new_agent(),
            token,
            gate: Gate::new(spec.max_concurrent_requests),
            replay,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn model(&self) -> &str {
        &self.spec.model
    }

    fn cache_path(&self, key: &str) -> PathBuf {
        self.spec.cache_dir.join(format!("{key}.json"))
    }

    fn cache_lookup(&self, key: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.cache_path(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        entry
            .response
            .get("text")
            .and_then(|t| t.as_str())
            .map(str::to_string)
    }

    fn cache_store(&self, key: &str, request: &RequestBody<'_>, response_text: &str) -> Result<()> {
        let entry = CacheEntry {
            request: serde_json::to_value(request)?,
            response: serde_json::json!({ "text": response_text }),
        };
        let path = self.cache_path(key);
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp.{}.{n}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string_pretty(&entry)?)
            .map_err(|e| Error::io(tmp.clone(), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(path, e))
    }

    fn try_once(&self, body: &str) -> std::result::Result<String, Attempt> {
        let mut request = self
            .agent
            .post(&self.spec.endpoint)
            .header("content-type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("authorization", format!("Bearer {token}"));
        }
        let mut response = request
            .send(body)
            .map_err(|e| Attempt::Retry(format!("transport: {e}")))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(format!("read: {e}")))?;
        match status {
            200..=299 => serde_json::from_str::<ResponseBody>(&text)
                .map(|r| r.text)
                .map_err(|e| Attempt::Fatal(format!("bad response body ({e}): {text}"))),
            429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}: {text}"))),
            _ => Err(Attempt::Fatal(format!("HTTP {status}: {text}"))),
        }
    }

    fn request_with_retries(&self, body: &str) -> std::result::Result<String, String> {
        let mut attempt = 0u32;
        loop {
            match self.try_once(body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(detail)) => return Err(detail),
                Err(Attempt::Retry(detail)) => {
                    if attempt >= self.spec.max_retries {
                        return Err(format!("{detail} (after {attempt} retries)"));
                    }
                    std::thread::sleep(backoff(attempt));
                    attempt += 1;
                }
            }
        }
    }

    /// Resolve one query: cache first, then (unless replaying) the wire.
    pub fn fetch(
        &self,
        key: &str,
        prompt: &Prompt,
        backend_id: &str,
        segment_id: &str,
        target: &str,
    ) -> Result<String> {
        if let Some(text) = self.cache_lookup(key) {
            return Ok(text);
        }
        if self.replay {
            return Err(Error::CacheMiss {
                key: key.to_string(),
            });
        }
        let request = RequestBody {
            model: &self.spec.model,
            text: &prompt.text,
            media: &prompt.media,
        };
        let body = serde_json::to_string(&request)?;
        let text = {
            let _permit = self.gate.acquire();
            self.request_with_retries(&body)
        }
        .map_err(|detail| Error::Backend {
            backend_id: backend_id.to_string(),
            segment_id: segment_id.to_string(),
            target: target.to_string(),
            detail,
        })?;
        self.cache_store(key, &request, &text)?;
        Ok(text)
    }
}

fn backoff(attempt: u32) -> Duration {
    let ms = 250u64.saturating_mul(1 << attempt.min(16));
    Duration::from_millis(ms.min(5_000))
}
