//! Minimal JSON-over-HTTP transport used by the remote clients.

use std::time::Duration;

use serde_json::Value;

use super::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
    Delete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpReply, BackendError>;
}

const SECRET_HEADERS: &[&str] = &["authorization", "x-goog-api-key", "api-key"];

/// Header list with credential values masked, for logging.
pub fn redacted_headers(headers: &[(String, String)]) -> Vec<(String, String)> {
    headers
        .iter()
        .map(|(k, v)| {
            if SECRET_HEADERS.contains(&k.to_ascii_lowercase().as_str()) {
                (k.clone(), "<redacted>".to_string())
            } else {
                (k.clone(), v.clone())
            }
        })
        .collect()
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpReply, BackendError> {
        log::debug!(
            "{:?} {} headers={:?} body={}",
            request.method,
            request.url,
            redacted_headers(&request.headers),
            request.body.as_ref().map(Value::to_string).unwrap_or_default()
        );
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
            Method::Delete => self.client.delete(&request.url),
        };
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if let Some(body) = &request.body {
            builder = builder
                .header("Content-Type", "application/json")
                .body(body.to_string());
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(e.to_string())
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(e.to_string())
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        log::debug!("reply {status}: {body}");
        Ok(HttpReply { status, body })
    }
}

/// Maps an HTTP reply to parsed JSON or the matching backend error.
pub fn json_or_error(reply: HttpReply) -> Result<Value, BackendError> {
    let message = || {
        serde_json::from_str::<Value>(&reply.body)
            .ok()
            .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
            .unwrap_or_else(|| reply.body.chars().take(200).collect())
    };
    match reply.status {
        200..=299 => serde_json::from_str(&reply.body)
            .map_err(|e| BackendError::Transport(format!("invalid JSON reply: {e}"))),
        401 | 403 => Err(BackendError::AuthFailure(message())),
        408 => Err(BackendError::Timeout(message())),
        429 => Err(BackendError::RateLimited(message())),
        status => Err(BackendError::Api {
            status,
            message: message(),
        }),
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use std::collections::VecDeque;
    use std::sync::Mutex;

    /// Returns queued replies in order and records every request.
    #[derive(Default)]
    pub struct QueueTransport {
        pub replies: Mutex<VecDeque<HttpReply>>,
        pub seen: Mutex<Vec<HttpRequest>>,
    }

    impl QueueTransport {
        pub fn with(replies: Vec<(u16, Value)>) -> Self {
            QueueTransport {
                replies: Mutex::new(
                    replies
                        .into_iter()
                        .map(|(status, body)| HttpReply {
                            status,
                            body: body.to_string(),
                        })
                        .collect(),
                ),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl HttpTransport for QueueTransport {
        fn send(&self, request: &HttpRequest) -> Result<HttpReply, BackendError> {
            self.seen.lock().unwrap().push(request.clone());
            self.replies
                .lock()
                .unwrap()
                .pop_front()
                .ok_or_else(|| BackendError::Transport("no scripted reply".into()))
        }
    }
}
