//! Shared plumbing for remote model backends: bounded retries with
//! exponential backoff, a per-backend concurrency limit, and a client for
//! chat-completion style HTTP APIs.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::Unavailable(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay_ms: 200,
        }
    }
}

impl RetryPolicy {
    /// Runs `f` up to `attempts` times, sleeping `base · 2^i` between tries.
    /// Non-transport errors are returned immediately.
    pub fn run<T>(&self, mut f: impl FnMut() -> Result<T, BackendError>) -> Result<T, BackendError> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for i in 0..attempts {
            match f() {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() => {
                    log::warn!("backend attempt {}/{} failed: {e}", i + 1, attempts);
                    last = Some(e);
                    if i + 1 < attempts {
                        std::thread::sleep(Duration::from_millis(self.base_delay_ms << i));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

/// Counting semaphore bounding in-flight requests to one backend.
#[derive(Debug)]
pub struct ConcurrencyLimit {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a ConcurrencyLimit);

impl ConcurrencyLimit {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    /// Full URL of the chat-completions endpoint.
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding the API key; no auth header
    /// when absent.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout() -> u64 {
    120
}

fn default_concurrency() -> usize {
    4
}

/// Client for OpenAI-compatible `chat/completions` endpoints.
pub struct ChatClient {
    settings: ChatSettings,
    http: reqwest::blocking::Client,
    limit: ConcurrencyLimit,
}

impl ChatClient {
    pub fn new(settings: ChatSettings) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let limit = ConcurrencyLimit::new(settings.concurrency);
        Ok(Self { settings, http, limit })
    }

    pub fn model(&self) -> &str {
        &self.settings.model
    }

    pub fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let key = api_key(self.settings.api_key_env.as_deref())?;
        let body = json!({
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let _permit = self.limit.acquire();
        self.settings.retry.run(|| {
            let mut req = self.http.post(&self.settings.url).json(&body);
            if let Some(k) = &key {
                req = req.bearer_auth(k);
            }
            let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                return Err(BackendError::Unavailable(format!("HTTP {status}")));
            }
            if !status.is_success() {
                return Err(BackendError::BadResponse(format!("HTTP {status}")));
            }
            let v: serde_json::Value = resp.json().map_err(|e| BackendError::BadResponse(e.to_string()))?;
            v.pointer("/choices/0/message/content")
                .and_then(|c| c.as_str())
                .map(str::to_string)
                .ok_or_else(|| BackendError::BadResponse("no choices[0].message.content".into()))
        })
    }
}

/// Single-pass `{name}` substitution; substituted values are never rescanned.
pub fn fill_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in vars {
            if tail.len() > name.len() + 1
                && tail[1..].starts_with(name)
                && tail[1 + name.len()..].starts_with('}')
            {
                out.push_str(value);
                rest = &tail[name.len() + 2..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

/// POSTs a JSON body and decodes a JSON reply, with retries.
pub fn post_json<B: Serialize, T: for<'de> Deserialize<'de>>(
    http: &reqwest::blocking::Client,
    url: &str,
    body: &B,
    retry: RetryPolicy,
) -> Result<T, BackendError> {
    post_json_with_key(http, url, None, body, retry)
}

/// [`post_json`] with an optional bearer token.
pub fn post_json_with_key<B: Serialize, T: for<'de> Deserialize<'de>>(
    http: &reqwest::blocking::Client,
    url: &str,
    key: Option<&str>,
    body: &B,
    retry: RetryPolicy,
) -> Result<T, BackendError> {
    retry.run(|| {
        let mut req = http.post(url).json(body);
        if let Some(k) = key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(BackendError::Unavailable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::BadResponse(format!("HTTP {status}")));
        }
        resp.json().map_err(|e| BackendError::BadResponse(e.to_string()))
    })
}

/// Reads the API key named by `var`, if any.
pub fn api_key(var: Option<&str>) -> Result<Option<String>, BackendError> {
    match var {
        Some(v) => std::env::var(v)
            .map(Some)
            .map_err(|_| BackendError::MissingCredential(v.to_string())),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn retries_transport_errors_then_gives_up() {
        let calls = AtomicUsize::new(0);
        let policy = RetryPolicy { attempts: 3, base_delay_ms: 1 };
        let r: Result<(), _> = policy.run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::Transport("down".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn bad_response_not_retried() {
        let calls = AtomicUsize::new(0);
        let r: Result<(), _> = RetryPolicy { attempts: 3, base_delay_ms: 1 }.run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::BadResponse("nope".into()))
        });
        assert!(r.is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn succeeds_after_transient_failure() {
        let calls = AtomicUsize::new(0);
        let r = RetryPolicy { attempts: 3, base_delay_ms: 1 }.run(|| {
            if calls.fetch_add(1, Ordering::SeqCst) == 0 {
                Err(BackendError::Unavailable("503".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(r.unwrap(), 7);
    }

    #[test]
    fn limit_bounds_in_flight() {
        let limit = Arc::new(ConcurrencyLimit::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        let cur = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limit, peak, cur) = (limit.clone(), peak.clone(), cur.clone());
                std::thread::spawn(move || {
                    let _p = limit.acquire();
                    let now = cur.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    cur.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn template_fill_is_single_pass() {
        assert_eq!(
            fill_template("Q: {query} / {x} / {", &[("query", "{x}"), ("x", "1")]),
            "Q: {x} / 1 / {"
        );
        assert_eq!(fill_template("{unknown}", &[("a", "b")]), "{unknown}");
    }

    #[test]
    fn missing_key_reported() {
        let client = ChatClient::new(ChatSettings {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key_env: Some("RAGKIT_TEST_SURELY_UNSET_KEY".into()),
            temperature: 0.0,
            timeout_secs: 1,
            concurrency: 1,
            retry: RetryPolicy::default(),
        })
        .unwrap();
        assert!(matches!(client.complete("s", "u"), Err(BackendError::MissingCredential(_))));
    }
}
