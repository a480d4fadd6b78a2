//! Client for a remote loss server.
//!
//! The server owns the model and the tokenizer; this client speaks a small
//! wire protocol — `POST /v1/token_losses` with `{"prompt", "context",
//! "target"}`, answered by `{"tokens", "losses", "base"}` — and converts
//! the reply to bits. Transport failures and 5xx responses retry with
//! exponential backoff; malformed replies and 4xx responses fail fast as
//! protocol errors. A counting semaphore bounds in-flight requests.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{LossBackend, ScoringRequest, TokenLossSequence};

/// Default bound on concurrent requests.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

/// Connection settings for a loss server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    /// Server root, e.g. `http://localhost:8601`; the endpoint path is
    /// appended by the client.
    pub base_url: String,
    /// Maximum concurrent requests.
    pub max_in_flight: usize,
    /// Retries after the first attempt (so `retries = 3` means up to four
    /// attempts).
    pub retries: usize,
    /// Backoff before the first retry; doubles on each subsequent one.
    pub backoff: Duration,
    /// Per-request timeout.
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> RemoteConfig {
        RemoteConfig {
            base_url: base_url.into(),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retries: 3,
            backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    context: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct WireReply {
    tokens: Vec<String>,
    losses: Vec<f64>,
    /// Logarithm base of the losses: `"e"` (nats) or `"2"` (bits).
    base: String,
}

/// [`LossBackend`] over HTTP. Cheap to share by reference across threads;
/// the in-flight bound applies per backend instance.
pub struct RemoteBackend {
    agent: ureq::Agent,
    endpoint: String,
    config: RemoteConfig,
    slots: Semaphore,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> RemoteBackend {
        let agent = ureq::config::Config::builder()
            .timeout_global(Some(config.timeout))
            .build()
            .new_agent();
        RemoteBackend {
            endpoint: format!("{}/v1/token_losses", config.base_url.trim_end_matches('/')),
            slots: Semaphore::new(config.max_in_flight.max(1)),
            agent,
            config,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn call_once(&self, req: &ScoringRequest) -> std::result::Result<WireReply, Attempt> {
        let body = WireRequest {
            prompt: req.speaker_prompt(),
            context: req.context(),
            target: req.target(),
        };
        let mut response = match self.agent.post(&self.endpoint).send_json(&body) {
            Ok(response) => response,
            // Overload and server-side failures are worth retrying; any
            // other status means the request itself is unacceptable.
            Err(ureq::Error::StatusCode(code)) if code >= 500 || code == 429 => {
                return Err(Attempt::Retry(format!("server answered {code}")));
            }
            Err(ureq::Error::StatusCode(code)) => {
                return Err(Attempt::Fail(Error::Protocol(format!(
                    "server rejected the request with status {code}"
                ))));
            }
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        response
            .body_mut()
            .read_json::<WireReply>()
            .map_err(|e| Attempt::Fail(Error::Protocol(format!("unreadable reply: {e}"))))
    }
}

enum Attempt {
    Retry(String),
    Fail(Error),
}

impl LossBackend for RemoteBackend {
    fn token_losses(&self, req: &ScoringRequest) -> Result<TokenLossSequence> {
        let _slot = self.slots.acquire();
        let attempts = self.config.retries + 1;
        let mut last_reason = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.backoff * (1 << (attempt - 1)));
            }
            match self.call_once(req) {
                Ok(reply) => return to_bits(reply),
                Err(Attempt::Retry(reason)) => last_reason = reason,
                Err(Attempt::Fail(error)) => return Err(error),
            }
        }
        Err(Error::ServerUnavailable { attempts, reason: last_reason })
    }
}

/// Validates a wire reply and converts its losses to bits.
fn to_bits(reply: WireReply) -> Result<TokenLossSequence> {
    if reply.tokens.len() != reply.losses.len() {
        return Err(Error::Protocol(format!(
            "reply carries {} tokens but {} losses",
            reply.tokens.len(),
            reply.losses.len()
        )));
    }
    let factor = match reply.base.as_str() {
        "2" => 1.0,
        "e" => std::f64::consts::LOG2_E,
        other => {
            return Err(Error::Protocol(format!(
                "unknown loss base {other:?} (expected \"e\" or \"2\")"
            )));
        }
    };
    let losses = reply.losses.iter().map(|l| l * factor).collect();
    TokenLossSequence::new(reply.tokens, losses)
}

// ---------- in-flight bounding ----------

struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore { permits: Mutex::new(permits), available: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore poisoned") += 1;
        self.0.available.notify_one();
    }
}
