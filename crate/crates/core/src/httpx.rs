//! Shared blocking JSON-over-HTTP plumbing with bounded retry.
//!
//! Transport failures and 5xx responses are retried with exponential
//! backoff; 4xx responses and malformed bodies fail immediately.

use std::thread::sleep;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    max_attempts: u32,
    backoff_base: Duration,
}

impl JsonClient {
    pub(crate) fn new(max_attempts: u32, backoff_base: Duration, timeout: Duration) -> Self {
        assert!(max_attempts >= 1, "client needs at least one attempt");
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        JsonClient { agent: config.into(), max_attempts, backoff_base }
    }

    /// POSTs `body` as JSON and decodes the JSON response. Retries only
    /// retryable failures; the final error is returned as-is.
    pub(crate) fn post_json<T: DeserializeOwned>(
        &self,
        url: &str,
        headers: &[(&str, String)],
        body: &impl Serialize,
    ) -> Result<T> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.try_once(url, headers, body) {
                Ok(value) => return Ok(value),
                Err(Attempt::Fatal(err)) => return Err(err),
                Err(Attempt::Retryable(err)) => {
                    if attempt >= self.max_attempts {
                        return Err(err);
                    }
                    sleep(self.backoff_base * 2u32.pow(attempt - 1));
                }
            }
        }
    }

    fn try_once<T: DeserializeOwned>(
        &self,
        url: &str,
        headers: &[(&str, String)],
        body: &impl Serialize,
    ) -> std::result::Result<T, Attempt> {
        let payload = serde_json::to_string(body).map_err(|err| {
            Attempt::Fatal(Error::Format(format!("request serialize: {err}")))
        })?;
        let mut req = self.agent.post(url).header("content-type", "application/json");
        for (name, value) in headers {
            req = req.header(*name, value.as_str());
        }
        let mut resp = req.send(&payload).map_err(classify)?;
        resp.body_mut().read_json::<T>().map_err(|err| {
            Attempt::Fatal(Error::Protocol(format!("malformed response body from {url}: {err}")))
        })
    }
}

enum Attempt {
    Retryable(Error),
    Fatal(Error),
}

/// 5xx and transport-level failures are retryable; 4xx and anything
/// structural is not.
fn classify(err: ureq::Error) -> Attempt {
    match err {
        ureq::Error::StatusCode(code) if (500..600).contains(&code) => {
            Attempt::Retryable(Error::Backend(format!("server error: status {code}")))
        }
        ureq::Error::StatusCode(code) => {
            Attempt::Fatal(Error::Protocol(format!("request rejected: status {code}")))
        }
        ureq::Error::Io(io) => Attempt::Retryable(Error::Backend(format!("transport: {io}"))),
        ureq::Error::Timeout(t) => Attempt::Retryable(Error::Backend(format!("timeout: {t}"))),
        ureq::Error::HostNotFound => Attempt::Retryable(Error::Backend("host not found".into())),
        ureq::Error::ConnectionFailed => {
            Attempt::Retryable(Error::Backend("connection failed".into()))
        }
        other => Attempt::Fatal(Error::Protocol(format!("http: {other}"))),
    }
}
