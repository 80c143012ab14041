//! Model endpoints: a chat-completions HTTP client and deterministic mocks.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::PromptBundle;
use crate::seed::derive_seed;
use crate::taskgen::{Answer, AnswerKey, TaskType, LABELS};

pub const API_KEY_ENV: &str = "SPECEVAL_API_KEY";

fn default_key_env() -> String {
    API_KEY_ENV.to_string()
}
fn default_top_k() -> u32 {
    1
}
fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpChat {
    /// Full URL of the chat-completions route.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_top_k")]
    pub top_k: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl HttpChat {
    pub fn new(base_url: &str, model: &str) -> Self {
        HttpChat {
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key_env: default_key_env(),
            temperature: 0.0,
            top_k: default_top_k(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelEndpoint {
    HttpChat(HttpChat),
    /// Answers from the task's answer key.
    Oracle,
    /// Replies with the same text to every task.
    FixedAnswer {
        template: String,
    },
    /// Seeded random answers of the right shape.
    RandomAnswer {
        seed: u64,
    },
}

impl ModelEndpoint {
    /// Name used in reports.
    pub fn name(&self) -> String {
        match self {
            ModelEndpoint::HttpChat(h) => h.model.clone(),
            ModelEndpoint::Oracle => "oracle".into(),
            ModelEndpoint::FixedAnswer { template } => format!("fixed:{template}"),
            ModelEndpoint::RandomAnswer { seed } => format!("random:{seed}"),
        }
    }

    pub fn needs_key(&self) -> bool {
        matches!(self, ModelEndpoint::Oracle)
    }
}

impl fmt::Display for ModelEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelEndpoint::HttpChat(h) => write!(f, "{}#{}", h.base_url, h.model),
            other => f.write_str(&other.name()),
        }
    }
}

/// `oracle`, `fixed:<text>`, `random:<seed>` or `<http url>#<model>`.
impl FromStr for ModelEndpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "oracle" {
            return Ok(ModelEndpoint::Oracle);
        }
        if let Some(t) = s.strip_prefix("fixed:") {
            return Ok(ModelEndpoint::FixedAnswer {
                template: t.to_string(),
            });
        }
        if let Some(n) = s.strip_prefix("random:") {
            return n
                .parse()
                .map(|seed| ModelEndpoint::RandomAnswer { seed })
                .map_err(|e| format!("bad seed `{n}`: {e}"));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            let (url, model) = s.split_once('#').unwrap_or((s, "default"));
            return Ok(ModelEndpoint::HttpChat(HttpChat::new(url, model)));
        }
        Err(format!("unknown endpoint `{s}`"))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("the oracle needs an answer key")]
    NoAnswerKey,
}

impl QueryError {
    fn retryable(&self) -> bool {
        matches!(self, QueryError::Transport(_) | QueryError::Timeout)
    }
}

/// What the oracle replies, in the format the parsers expect.
pub fn oracle_reply(key: &AnswerKey) -> String {
    match &key.answer {
        Answer::Judgement { truth, .. } => truth.to_string(),
        Answer::Selection { label, .. } => label.clone(),
        Answer::Infilling { hidden, .. } => format!("```java\n{hidden}\n```"),
        Answer::Generation {
            annotated_program, ..
        } => format!("```java\n{annotated_program}```"),
    }
}

fn random_reply(seed: u64, prompt: &PromptBundle) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[&prompt.task_id]));
    match prompt.task_type {
        TaskType::Judgement => rng.gen_bool(0.5).to_string(),
        TaskType::Selection => LABELS.choose(&mut rng).expect("labels").to_string(),
        TaskType::Infilling => {
            let words: Vec<&str> = prompt
                .task_text
                .split(|c: char| !c.is_ascii_alphanumeric())
                .filter(|w| w.chars().next().is_some_and(|c| c.is_ascii_lowercase()))
                .collect();
            let w = words.choose(&mut rng).copied().unwrap_or("0");
            format!("```java\n{w}\n```")
        }
        TaskType::Generation => "```java\n//@ ensures true;\n```".to_string(),
    }
}

/// Send a prompt to an endpoint. `key` is consulted only by the oracle.
pub fn query(
    endpoint: &ModelEndpoint,
    prompt: &PromptBundle,
    key: Option<&AnswerKey>,
) -> Result<String, QueryError> {
    match endpoint {
        ModelEndpoint::Oracle => key.map(oracle_reply).ok_or(QueryError::NoAnswerKey),
        ModelEndpoint::FixedAnswer { template } => Ok(template.clone()),
        ModelEndpoint::RandomAnswer { seed } => Ok(random_reply(*seed, prompt)),
        ModelEndpoint::HttpChat(h) => query_http(h, prompt),
    }
}

fn query_http(h: &HttpChat, prompt: &PromptBundle) -> Result<String, QueryError> {
    let key = std::env::var(&h.api_key_env).ok();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(h.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let messages: Vec<Value> = prompt
        .messages()
        .into_iter()
        .map(|(role, content)| json!({ "role": role, "content": content }))
        .collect();
    let body = json!({
        "model": h.model,
        "messages": messages,
        "temperature": h.temperature,
        "top_k": h.top_k,
    });
    let mut attempt = 0;
    loop {
        let result = post_once(&agent, h, key.as_deref(), &body);
        match result {
            Err(e) if e.retryable() && attempt < h.max_retries => {
                let wait = h.backoff_ms.saturating_mul(1 << attempt.min(10));
                log::warn!("{}: {e}; retrying in {wait} ms", prompt.task_id);
                thread::sleep(Duration::from_millis(wait));
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn post_once(
    agent: &ureq::Agent,
    h: &HttpChat,
    key: Option<&str>,
    body: &Value,
) -> Result<String, QueryError> {
    let mut req = agent
        .post(&h.base_url)
        .header("Content-Type", "application/json");
    if let Some(k) = key {
        req = req.header("Authorization", &format!("Bearer {k}"));
    }
    let mut resp = req.send(body.to_string()).map_err(|e| match e {
        ureq::Error::Timeout(_) => QueryError::Timeout,
        other => QueryError::Transport(other.to_string()),
    })?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| QueryError::Transport(e.to_string()))?;
    match status {
        200..=299 => {}
        401 | 403 => return Err(QueryError::Auth(format!("HTTP {status}"))),
        408 | 429 | 500..=599 => return Err(QueryError::Transport(format!("HTTP {status}"))),
        _ => return Err(QueryError::BadResponse(format!("HTTP {status}: {text}"))),
    }
    let v: Value =
        serde_json::from_str(&text).map_err(|e| QueryError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| QueryError::BadResponse("no choices[0].message.content".into()))
}

/// Token bucket: at most `burst` requests at once, refilled at `per_sec`.
#[derive(Debug)]
pub struct RateLimiter {
    per_sec: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_sec: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        RateLimiter {
            per_sec,
            burst,
            state: Mutex::new((burst, Instant::now())),
        }
    }

    /// Block until a token is available and take it.
    pub fn acquire(&self) {
        if self.per_sec <= 0.0 {
            return;
        }
        loop {
            let wait = {
                let mut s = self.state.lock().expect("limiter lock");
                let now = Instant::now();
                let refill = now.duration_since(s.1).as_secs_f64() * self.per_sec;
                s.0 = (s.0 + refill).min(self.burst);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.per_sec
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_strings() {
        assert_eq!(
            "oracle".parse::<ModelEndpoint>().unwrap(),
            ModelEndpoint::Oracle
        );
        assert_eq!(
            "fixed:true".parse::<ModelEndpoint>().unwrap(),
            ModelEndpoint::FixedAnswer {
                template: "true".into()
            }
        );
        assert_eq!(
            "random:3".parse::<ModelEndpoint>().unwrap(),
            ModelEndpoint::RandomAnswer { seed: 3 }
        );
        let ModelEndpoint::HttpChat(h) = "http://localhost:9/v1/chat#m1".parse().unwrap() else {
            panic!()
        };
        assert_eq!(
            (h.base_url.as_str(), h.model.as_str()),
            ("http://localhost:9/v1/chat", "m1")
        );
        assert_eq!((h.temperature, h.top_k), (0.0, 1));
        assert!("carrier-pigeon".parse::<ModelEndpoint>().is_err());
    }

    #[test]
    fn limiter_spaces_requests() {
        let l = RateLimiter::new(50.0, 1);
        let t = Instant::now();
        for _ in 0..4 {
            l.acquire();
        }
        // One token up front, three more at 20 ms each.
        assert!(t.elapsed() >= Duration::from_millis(55));
    }
}
