//! Chat-completion client over HTTP.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Backend, Conversation, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token. No token is sent when
    /// unset.
    pub token_env: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub backoff_ms: u64,
    pub max_concurrent: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            token_env: None,
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 60,
            backoff_ms: 500,
            max_concurrent: 4,
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
    permits: Semaphore,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, GatewayError> {
        if cfg.endpoint.is_empty() {
            return Err(GatewayError::Config("http backend needs an endpoint".into()));
        }
        if cfg.model.is_empty() {
            return Err(GatewayError::Config("http backend needs a model name".into()));
        }
        let token = match &cfg.token_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let permits = Semaphore { free: Mutex::new(cfg.max_concurrent.max(1)), cv: Condvar::new() };
        Ok(Self { cfg, token, client, permits })
    }

    fn request_body(&self, conv: &Conversation) -> serde_json::Value {
        json!({
            "model": self.cfg.model,
            "messages": conv.messages(),
            "temperature": self.cfg.temperature,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, GatewayError> {
        let mut req = self.client.post(&self.cfg.endpoint).json(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout
            } else {
                GatewayError::Http(e.to_string())
            }
        })?;
        let status = resp.status();
        match status.as_u16() {
            401 | 403 => return Err(GatewayError::Auth(status.to_string())),
            429 => return Err(GatewayError::RateLimit),
            s if s >= 500 => return Err(GatewayError::Http(status.to_string())),
            s if s >= 400 => {
                return Err(GatewayError::Response(format!("{status}: {}", resp.text().unwrap_or_default())))
            }
            _ => {}
        }
        let value: serde_json::Value = resp.json().map_err(|e| GatewayError::Response(e.to_string()))?;
        extract_content(&value)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Response(format!("no message content in {value}")))
    }
}

/// Reply text from an OpenAI-style `choices[0].message.content`, or a
/// top-level `content` field.
fn extract_content(v: &serde_json::Value) -> Option<&str> {
    v.pointer("/choices/0/message/content").or_else(|| v.get("content")).and_then(serde_json::Value::as_str)
}

impl Backend for HttpBackend {
    fn complete(&self, conv: &Conversation) -> Result<String, GatewayError> {
        let body = self.request_body(conv);
        let _permit = self.permits.acquire();
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Err(e) if e.is_transient() && tries < self.cfg.max_retries => {
                    tries += 1;
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                other => return other,
            }
        }
    }
}
