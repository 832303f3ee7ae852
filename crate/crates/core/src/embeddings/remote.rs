//! JSON-over-HTTP embedding provider.
//!
//! `POST <endpoint>/embed` with `{"texts": [...]}`; a 200 response carries
//! `{"dim": D, "vectors": [[...], ...]}` with one vector per text.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable that overrides the configured provider endpoint.
pub const PROVIDER_URL_ENV: &str = "DRIFTDET_PROVIDER_URL";

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RemoteProvider {
    endpoint: String,
    dim: usize,
    attempts: u32,
    backoff: Duration,
    max_in_flight: usize,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Result<Self> {
        let endpoint = endpoint.into();
        if endpoint.is_empty() {
            return Err(Error::InvalidArgument("remote backend needs an endpoint".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("remote backend dimension must be positive".into()));
        }
        Ok(RemoteProvider {
            endpoint: endpoint.trim_end_matches('/').to_owned(),
            dim,
            attempts: 3,
            backoff: Duration::from_millis(200),
            max_in_flight: 4,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
        })
    }

    /// Delay before the second attempt; doubles on each further retry.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    /// Embeds `texts` in one request, retrying transport failures and 5xx
    /// responses.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embed", self.endpoint);
        let mut delay = self.backoff;
        let mut last_err = None;
        for attempt in 1..=self.attempts {
            match self.agent.post(&url).send_json(EmbedRequest { texts }) {
                Ok(resp) => return self.decode(resp, texts.len()),
                Err(ureq::Error::Status(status, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    let err = Error::Provider { status, body };
                    if status < 500 && status != 429 {
                        return Err(err);
                    }
                    last_err = Some(err);
                }
                Err(ureq::Error::Transport(t)) => {
                    last_err = Some(Error::Provider {
                        status: 0,
                        body: t.to_string(),
                    });
                }
            }
            if attempt < self.attempts {
                log::warn!("embedding request to {url} failed (attempt {attempt}), retrying");
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(last_err.expect("at least one attempt"))
    }

    fn decode(&self, resp: ureq::Response, expected: usize) -> Result<Vec<Vec<f64>>> {
        let status = resp.status();
        let body: EmbedResponse = resp.into_json().map_err(|e| Error::Provider {
            status,
            body: format!("malformed response: {e}"),
        })?;
        if body.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: body.dim,
            });
        }
        if body.vectors.len() != expected {
            return Err(Error::Provider {
                status,
                body: format!("expected {expected} vectors, got {}", body.vectors.len()),
            });
        }
        for v in &body.vectors {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Provider {
                    status,
                    body: "non-finite value in response".into(),
                });
            }
        }
        Ok(body.vectors)
    }
}
