//! Minimal client for OpenAI-compatible chat-completion endpoints.

use std::sync::{Arc, Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }
}

/// Where to send requests. The key itself is read from the named
/// environment variable at call time and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL up to and including the API version, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_key_header")]
    pub api_key_header: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Attempts per request, counting the first.
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_key_header() -> String {
    "Authorization".into()
}
fn default_timeout() -> u64 {
    120
}
fn default_attempts() -> u32 {
    4
}
fn default_backoff() -> u64 {
    500
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: default_key_env(),
            api_key_header: default_key_header(),
            timeout_secs: default_timeout(),
            max_attempts: default_attempts(),
            backoff_ms: default_backoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decoding {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_top_k")]
    pub top_k: Option<u32>,
    #[serde(default)]
    pub presence_penalty: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: Option<u32>,
}

fn default_temperature() -> f64 {
    0.6
}
fn default_top_p() -> f64 {
    0.95
}
fn default_top_k() -> Option<u32> {
    Some(20)
}
fn default_max_tokens() -> Option<u32> {
    Some(256)
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: default_temperature(),
            top_p: default_top_p(),
            top_k: default_top_k(),
            presence_penalty: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

impl Decoding {
    pub fn greedy(max_tokens: Option<u32>) -> Self {
        Decoding {
            temperature: 0.0,
            top_p: 1.0,
            top_k: None,
            presence_penalty: 0.0,
            max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    /// Visible content, preceded by any separately reported reasoning wrapped
    /// in `<think>` tags.
    pub text: String,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Protocol(String),
}

/// Caps concurrent requests across every client that shares it.
#[derive(Debug)]
pub struct Limiter {
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter lock") -= 1;
        self.0.freed.notify_one();
    }
}

impl Limiter {
    pub fn new(cap: usize) -> Self {
        Limiter {
            cap: cap.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    /// The process-wide limiter; the first caller fixes its capacity.
    pub fn global(cap: usize) -> Arc<Limiter> {
        static GLOBAL: OnceLock<Arc<Limiter>> = OnceLock::new();
        GLOBAL.get_or_init(|| Arc::new(Limiter::new(cap))).clone()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        Permit(self)
    }
}

#[derive(Debug)]
pub struct ChatClient {
    config: EndpointConfig,
    http: ureq::Agent,
    limiter: Arc<Limiter>,
}

impl ChatClient {
    pub fn new(config: EndpointConfig, limiter: Arc<Limiter>) -> Self {
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        ChatClient {
            config,
            http,
            limiter,
        }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, messages: &[ChatMessage], decoding: &Decoding) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": decoding.temperature,
            "top_p": decoding.top_p,
            "presence_penalty": decoding.presence_penalty,
        });
        if let Some(k) = decoding.top_k {
            body["top_k"] = json!(k);
        }
        if let Some(m) = decoding.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    /// Sends one completion request, retrying transport errors, HTTP 429
    /// and 5xx with exponential backoff.
    pub fn complete(&self, messages: &[ChatMessage], decoding: &Decoding) -> Result<Completion, ChatError> {
        let body = self.request_body(messages, decoding);
        let key = std::env::var(&self.config.api_key_env).ok().filter(|k| !k.is_empty());
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
                std::thread::sleep(Duration::from_millis(wait.min(30_000)));
            }
            let _permit = self.limiter.acquire();
            let mut req = self.http.post(&self.url());
            if let Some(key) = &key {
                let value = if self.config.api_key_header.eq_ignore_ascii_case("authorization") {
                    format!("Bearer {key}")
                } else {
                    key.clone()
                };
                req = req.header(self.config.api_key_header.as_str(), value);
            }
            let mut resp = match req.send_json(&body) {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    log::warn!("chat request failed (attempt {}): {last}", attempt + 1);
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = match resp.body_mut().read_to_string() {
                Ok(t) => t,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            if status == 429 || status >= 500 {
                last = format!("HTTP {status}: {}", truncate(&text));
                log::warn!("chat request failed (attempt {}): {last}", attempt + 1);
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(ChatError::Http {
                    status,
                    body: truncate(&text),
                });
            }
            return parse_completion(&text);
        }
        Err(ChatError::Transport {
            attempts,
            message: last,
        })
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(500).collect()
}

pub fn parse_completion(text: &str) -> Result<Completion, ChatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ChatError::Protocol(e.to_string()))?;
    let message = v
        .pointer("/choices/0/message")
        .ok_or_else(|| ChatError::Protocol("no choices[0].message".into()))?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or("");
    let reasoning = message
        .get("reasoning_content")
        .or_else(|| message.get("reasoning"))
        .and_then(Value::as_str)
        .filter(|r| !r.is_empty());
    let text = match reasoning {
        Some(r) => format!("<think>{r}</think>\n{content}"),
        None => content.to_string(),
    };
    let completion_tokens = v.pointer("/usage/completion_tokens").and_then(Value::as_u64);
    Ok(Completion {
        text,
        completion_tokens,
    })
}
