//! Blocking chat-completion client with retries and a concurrency cap.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::EndpointConfig;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("endpoint unavailable after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: String },
    #[error("endpoint rejected the request with status {0}")]
    Rejected(u16),
    #[error("malformed completion body: {0}")]
    Body(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryRecord {
    pub attempt: u32,
    pub reason: String,
    pub backoff_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub usage: Option<Usage>,
    pub retries: Vec<RetryRecord>,
}

/// Counting semaphore.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct ChatClient {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    slots: Slots,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl ChatClient {
    pub fn new(cfg: EndpointConfig) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout()))
            .http_status_as_error(false)
            .build();
        let api_key = cfg.api_key();
        let slots = Slots { free: Mutex::new(cfg.concurrency.max(1)), cv: Condvar::new() };
        Self { agent: ureq::Agent::new_with_config(config), api_key, slots, cfg }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        })
    }

    fn attempt(&self, body: &Value) -> Result<(String, Option<Usage>), Attempt> {
        let mut req = self.agent.post(self.cfg.completions_url()).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if status >= 400 {
            return Err(Attempt::Fatal(GatewayError::Rejected(status)));
        }
        let v: Value = resp.body_mut().read_json().map_err(|e| Attempt::Retry(e.to_string()))?;
        let text = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| Attempt::Fatal(GatewayError::Body(v.to_string())))?;
        let usage = v.get("usage").and_then(|u| serde_json::from_value(u.clone()).ok());
        Ok((text.to_string(), usage))
    }

    /// Sends one prompt. Transport failures, timeouts, 429 and 5xx replies
    /// are retried up to `max_retries` times with doubling backoff.
    pub fn complete(&self, prompt: &str) -> Result<Completion, GatewayError> {
        let _slot = self.slots.acquire();
        let body = self.request_body(prompt);
        let start = Instant::now();
        let mut retries = Vec::new();
        let mut backoff = self.cfg.backoff_ms;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(&body) {
                Ok((text, usage)) => {
                    let latency_ms = start.elapsed().as_millis() as u64;
                    return Ok(Completion { text, latency_ms, usage, retries });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    if attempt > self.cfg.max_retries {
                        return Err(GatewayError::Unavailable { attempts: attempt, last: reason });
                    }
                    log::warn!("chat completion attempt {attempt} failed: {reason}; retrying in {backoff} ms");
                    retries.push(RetryRecord { attempt, reason, backoff_ms: backoff });
                    std::thread::sleep(Duration::from_millis(backoff));
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
    }
}
