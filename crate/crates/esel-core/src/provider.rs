//! Completion/scoring providers: a deterministic fixture-backed mock for
//! offline runs and tests, and an HTTP client for any endpoint speaking the
//! wire protocol (`POST {base}/v1/complete` and `POST {base}/v1/score`).
//!
//! Stop strings are enforced client-side by the evaluation pipeline even if
//! a provider honors them, so correctness never depends on provider
//! behavior.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A text-completion request. Greedy evaluation paths always set
/// `temperature` 0; the sampling fields exist for providers that support
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub stop: Vec<String>,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn greedy(prompt: impl Into<String>, max_tokens: usize, stop: Vec<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            max_tokens,
            stop,
            temperature: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_tokens == 0 {
            return Err(Error::contract("max_tokens must be positive"));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::contract("temperature must be >= 0"));
        }
        Ok(())
    }
}

/// A scoring request: the provider returns the mean log-probability of
/// `completion` conditioned on `prompt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub completion: String,
}

impl ScoreRequest {
    fn validate(&self) -> Result<()> {
        if self.completion.is_empty() {
            return Err(Error::contract("completion must be non-empty"));
        }
        Ok(())
    }
}

/// A completion/scoring backend. Implementations must be safe for
/// concurrent calls; requests are idempotent by contract.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String>;
    fn score(&self, req: &ScoreRequest) -> Result<f64>;
}

/// One line of a mock fixture file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FixtureEntry {
    Complete {
        prompt: String,
        text: String,
    },
    Score {
        prompt: String,
        completion: String,
        avg_logprob: f64,
    },
}

/// Deterministic provider answering exactly from a fixture.
#[derive(Debug, Default, Clone)]
pub struct MockProvider {
    completions: HashMap<String, String>,
    scores: HashMap<(String, String), f64>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_completion(mut self, prompt: impl Into<String>, text: impl Into<String>) -> Self {
        self.completions.insert(prompt.into(), text.into());
        self
    }

    pub fn with_score(
        mut self,
        prompt: impl Into<String>,
        completion: impl Into<String>,
        avg_logprob: f64,
    ) -> Self {
        self.scores
            .insert((prompt.into(), completion.into()), avg_logprob);
        self
    }

    pub fn len(&self) -> usize {
        self.completions.len() + self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Load a mock provider from a JSONL fixture of [`FixtureEntry`] lines.
/// Duplicate keys are a load error.
pub fn load_mock(path: impl AsRef<Path>) -> Result<MockProvider> {
    let text = std::fs::read_to_string(path)?;
    let mut mock = MockProvider::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: FixtureEntry = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        match entry {
            FixtureEntry::Complete { prompt, text } => {
                if mock.completions.insert(prompt, text).is_some() {
                    return Err(Error::MalformedLine {
                        line: i + 1,
                        message: "duplicate completion prompt".into(),
                    });
                }
            }
            FixtureEntry::Score {
                prompt,
                completion,
                avg_logprob,
            } => {
                if !avg_logprob.is_finite() {
                    return Err(Error::MalformedLine {
                        line: i + 1,
                        message: "avg_logprob must be finite".into(),
                    });
                }
                if mock
                    .scores
                    .insert((prompt, completion), avg_logprob)
                    .is_some()
                {
                    return Err(Error::MalformedLine {
                        line: i + 1,
                        message: "duplicate score key".into(),
                    });
                }
            }
        }
    }
    Ok(mock)
}

impl Provider for MockProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        req.validate()?;
        self.completions
            .get(&req.prompt)
            .cloned()
            .ok_or(Error::NoFixture)
    }

    fn score(&self, req: &ScoreRequest) -> Result<f64> {
        req.validate()?;
        self.scores
            .get(&(req.prompt.clone(), req.completion.clone()))
            .copied()
            .ok_or(Error::NoFixture)
    }
}

#[derive(Serialize)]
struct WireCompleteBody<'a> {
    prompt: &'a str,
    max_tokens: usize,
    stop: &'a [String],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireCompleteResponse {
    text: String,
}

#[derive(Deserialize)]
struct WireScoreResponse {
    avg_logprob: f64,
}

#[derive(Deserialize)]
struct WireError {
    error: String,
}

/// HTTP provider speaking the wire protocol, with bounded retry (3 attempts,
/// exponential backoff) on transport errors and 5xx responses.
pub struct HttpProvider {
    base_url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
    backoff: Duration,
    retries: AtomicU64,
}

impl HttpProvider {
    pub fn new(base_url: impl Into<String>, token: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        Ok(HttpProvider {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token,
            client,
            backoff: Duration::from_millis(100),
            retries: AtomicU64::new(0),
        })
    }

    /// Build from `MODEL_BASE_URL` / `MODEL_TOKEN`; `None` when the base URL
    /// is unset (mock-only mode).
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var("MODEL_BASE_URL") {
            Ok(url) if !url.is_empty() => {
                let token = std::env::var("MODEL_TOKEN").ok().filter(|t| !t.is_empty());
                Ok(Some(Self::new(url, token)?))
            }
            _ => Ok(None),
        }
    }

    /// Shrink the retry backoff (tests).
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    /// Total retries performed so far.
    pub fn retry_count(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        endpoint: &str,
        body: &B,
    ) -> Result<R> {
        const ATTEMPTS: u32 = 3;
        let url = format!("{}{endpoint}", self.base_url);
        let mut last_error = String::new();
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                self.retries.fetch_add(1, Ordering::Relaxed);
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            let mut request = self.client.post(&url).json(body);
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let text = response
                            .text()
                            .map_err(|e| Error::Provider(e.to_string()))?;
                        return serde_json::from_str(&text)
                            .map_err(|e| Error::Provider(format!("non-conforming response: {e}")));
                    }
                    let body_text = response.text().unwrap_or_default();
                    let message = serde_json::from_str::<WireError>(&body_text)
                        .map(|w| w.error)
                        .unwrap_or(body_text);
                    last_error = format!("{status}: {message}");
                    if !status.is_server_error() {
                        // Client errors are not retriable.
                        return Err(Error::Provider(last_error));
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(Error::Provider(format!(
            "gave up after {ATTEMPTS} attempts: {last_error}"
        )))
    }
}

impl Provider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String> {
        req.validate()?;
        let body = WireCompleteBody {
            prompt: &req.prompt,
            max_tokens: req.max_tokens,
            stop: &req.stop,
            temperature: req.temperature,
        };
        let response: WireCompleteResponse = self.post_json("/v1/complete", &body)?;
        Ok(response.text)
    }

    fn score(&self, req: &ScoreRequest) -> Result<f64> {
        req.validate()?;
        let response: WireScoreResponse = self.post_json("/v1/score", req)?;
        if !response.avg_logprob.is_finite() {
            return Err(Error::Provider("non-finite avg_logprob".into()));
        }
        Ok(response.avg_logprob)
    }
}
