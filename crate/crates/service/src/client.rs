use std::time::Duration;

use dualcloak::evaluation::VerificationServiceClient;
use dualcloak::{Error, ImageTensor, Result};
use serde::{Deserialize, Serialize};

use crate::wire::{encode_image, VerifyRequest, VerifyResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientOptions {
    /// Per-request timeout in seconds.
    pub timeout_secs: f64,
    /// Extra attempts after a transport failure or 5xx answer.
    pub retries: u32,
    /// Pause before the first retry, doubled after each further one.
    pub backoff_ms: u64,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            timeout_secs: 10.0,
            retries: 2,
            backoff_ms: 100,
        }
    }
}

/// Blocking client for `POST /verify`.
pub struct HttpVerificationClient {
    url: String,
    opts: ClientOptions,
    http: reqwest::blocking::Client,
}

impl HttpVerificationClient {
    /// `endpoint` is either the service base URL or the full `/verify` URL.
    pub fn new(endpoint: &str, opts: ClientOptions) -> Result<Self> {
        if !(opts.timeout_secs > 0.0) {
            return Err(Error::Parameter("client timeout must be positive".into()));
        }
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/verify") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/verify")
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(opts.timeout_secs))
            .build()
            .map_err(|e| Error::Transport {
                retries: 0,
                reason: e.to_string(),
            })?;
        Ok(Self { url, opts, http })
    }

    fn attempt(&self, body: &VerifyRequest) -> std::result::Result<f64, Attempt> {
        let resp = self
            .http
            .post(&self.url)
            .json(body)
            .send()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() {
            return Err(Attempt::Retry(format!("server answered {status}")));
        }
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Fatal(Error::Protocol(format!(
                "{} answered {status}: {text}",
                self.url
            ))));
        }
        let parsed: VerifyResponse = serde_json::from_str(&text).map_err(|e| {
            Attempt::Fatal(Error::Protocol(format!("malformed response from {}: {e}", self.url)))
        })?;
        if !parsed.confidence.is_finite() {
            return Err(Attempt::Fatal(Error::Protocol(format!(
                "{} returned a non-finite confidence",
                self.url
            ))));
        }
        Ok(parsed.confidence)
    }
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl VerificationServiceClient for HttpVerificationClient {
    fn endpoint(&self) -> &str {
        &self.url
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.opts.timeout_secs)
    }

    fn confidence(&self, a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
        let body = VerifyRequest {
            image_a: encode_image(a)?,
            image_b: encode_image(b)?,
        };
        let mut backoff = Duration::from_millis(self.opts.backoff_ms);
        let mut last = String::new();
        for attempt in 0..=self.opts.retries {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            match self.attempt(&body) {
                Ok(c) => return Ok(c),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    tracing::debug!(attempt, %reason, "verify request failed");
                    last = reason;
                }
            }
        }
        Err(Error::Transport {
            retries: self.opts.retries,
            reason: format!("{}: {last}", self.url),
        })
    }
}
