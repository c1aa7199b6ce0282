//! Chat-completion HTTP backend: POSTs the de facto
//! `{model, messages, temperature, max_tokens}` body and reads
//! `choices[0].message.content`. Reaches hosted or self-hosted fine-tuned
//! models identically.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{extract_code, GenerationRequest, GenerationResult, ModelBackend};
use crate::error::{Result, ZfuzzError};

pub const ENV_BACKEND_URL: &str = "ZFUZZ_BACKEND_URL";
pub const ENV_API_KEY: &str = "ZFUZZ_API_KEY";
pub const ENV_MODEL: &str = "ZFUZZ_MODEL";

const DEFAULT_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub path: String,
    pub api_key: Option<String>,
    pub model: String,
    /// Transport retries after the first attempt.
    pub retries: u32,
    /// First backoff; doubles per retry (1s/2s/4s at the default).
    pub backoff: Duration,
    pub request_timeout: Duration,
    /// Concurrent in-flight request cap.
    pub max_in_flight: usize,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            base_url: String::new(),
            path: DEFAULT_PATH.to_string(),
            api_key: None,
            model: "default".to_string(),
            retries: 3,
            backoff: Duration::from_secs(1),
            request_timeout: Duration::from_secs(120),
            max_in_flight: 4,
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    gate: Semaphore,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self> {
        if config.base_url.is_empty() {
            return Err(ZfuzzError::config(format!(
                "http backend needs a base URL (flag or {ENV_BACKEND_URL})"
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| ZfuzzError::Backend(format!("cannot build http client: {e}")))?;
        let gate = Semaphore::new(config.max_in_flight.max(1));
        Ok(HttpBackend {
            config,
            client,
            gate,
        })
    }

    /// Configuration from `ZFUZZ_BACKEND_URL`, `ZFUZZ_API_KEY`, `ZFUZZ_MODEL`.
    pub fn from_env() -> Result<Self> {
        let mut config = HttpBackendConfig {
            base_url: std::env::var(ENV_BACKEND_URL).unwrap_or_default(),
            ..Default::default()
        };
        config.api_key = std::env::var(ENV_API_KEY).ok();
        if let Ok(model) = std::env::var(ENV_MODEL) {
            config.model = model;
        }
        Self::new(config)
    }

    fn endpoint(&self) -> String {
        format!(
            "{}{}",
            self.config.base_url.trim_end_matches('/'),
            self.config.path
        )
    }

    fn post_once(&self, request: &GenerationRequest) -> std::result::Result<String, PostError> {
        let model = if request.model_name == "default" {
            self.config.model.clone()
        } else {
            request.model_name.clone()
        };
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut req = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| PostError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| PostError::Transport(e.to_string()))?;
        if !status.is_success() {
            let excerpt: String = text.chars().take(512).collect();
            return Err(PostError::Status(status.as_u16(), excerpt));
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| PostError::Protocol(format!("malformed response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| PostError::Protocol("response has no choices".to_string()))
    }
}

enum PostError {
    Transport(String),
    Status(u16, String),
    Protocol(String),
}

impl ModelBackend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult> {
        let _permit = self.gate.acquire();
        let start = Instant::now();
        let mut backoff = self.config.backoff;
        let mut attempt = 0u32;
        let raw_text = loop {
            match self.post_once(request) {
                Ok(text) => break text,
                // Only transport failures retry; HTTP and protocol errors
                // surface immediately.
                Err(PostError::Transport(msg)) => {
                    if attempt >= self.config.retries {
                        return Err(ZfuzzError::Backend(format!(
                            "transport failure after {} attempts: {msg}",
                            attempt + 1
                        )));
                    }
                    attempt += 1;
                    std::thread::sleep(backoff);
                    backoff *= 2;
                }
                Err(PostError::Status(code, excerpt)) => {
                    return Err(ZfuzzError::Backend(format!(
                        "http status {code}: {excerpt}"
                    )));
                }
                Err(PostError::Protocol(msg)) => {
                    return Err(ZfuzzError::Backend(msg));
                }
            }
        };
        Ok(GenerationResult {
            extracted_code: extract_code(&raw_text),
            raw_text,
            latency_ms: start.elapsed().as_millis() as u64,
            backend_id: self.id().to_string(),
        })
    }

    fn id(&self) -> &str {
        "http"
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Minimal counting semaphore for the in-flight cap.
struct Semaphore {
    state: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            state: Mutex::new(permits),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.state.lock().unwrap();
        while *available == 0 {
            available = self.cv.wait(available).unwrap();
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut available = self.0.state.lock().unwrap();
        *available += 1;
        self.0.cv.notify_one();
    }
}
