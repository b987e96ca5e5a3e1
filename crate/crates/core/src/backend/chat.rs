//! Single-turn chat backends. Each case is one stateless request.

use std::sync::Arc;

use serde_json::{json, Value};

use super::http::{json_or_error, HttpRequest, HttpTransport, Method};
use super::{Analyzer, BackendDescriptor, BackendError, CompletionRequest, Provider};

pub const OPENAI_BASE: &str = "https://api.openai.com/v1";
pub const GEMINI_BASE: &str = "https://generativelanguage.googleapis.com/v1beta";

pub struct ChatClient {
    provider: Provider,
    model_id: String,
    temperature: Option<f64>,
    base: String,
    api_key: String,
    transport: Arc<dyn HttpTransport>,
}

/// Endpoint root: explicit descriptor override, then `OPENAI_BASE_URL` /
/// `GEMINI_BASE_URL`, then the vendor default.
pub(crate) fn endpoint_base(descriptor: &BackendDescriptor) -> String {
    let (var, default) = match descriptor.provider {
        Provider::Gemini => ("GEMINI_BASE_URL", GEMINI_BASE),
        _ => ("OPENAI_BASE_URL", OPENAI_BASE),
    };
    descriptor
        .api_base
        .clone()
        .or_else(|| std::env::var(var).ok())
        .unwrap_or_else(|| default.to_string())
        .trim_end_matches('/')
        .to_string()
}

impl ChatClient {
    pub fn new(
        descriptor: &BackendDescriptor,
        api_key: String,
        transport: Arc<dyn HttpTransport>,
    ) -> Result<Self, BackendError> {
        if descriptor.provider == Provider::Local {
            return Err(BackendError::Config(format!(
                "{} is not a remote chat backend",
                descriptor.shorthand
            )));
        }
        Ok(ChatClient {
            provider: descriptor.provider,
            model_id: descriptor.model_id.clone(),
            temperature: descriptor.temperature,
            base: endpoint_base(descriptor),
            api_key,
            transport,
        })
    }

    fn build(&self, prompt: &str) -> HttpRequest {
        match self.provider {
            Provider::Gemini => {
                let mut body = json!({
                    "contents": [{"role": "user", "parts": [{"text": prompt}]}]
                });
                if let Some(t) = self.temperature {
                    body["generationConfig"] = json!({ "temperature": t });
                }
                HttpRequest {
                    method: Method::Post,
                    url: format!("{}/models/{}:generateContent", self.base, self.model_id),
                    headers: vec![("x-goog-api-key".into(), self.api_key.clone())],
                    body: Some(body),
                }
            }
            _ => {
                let mut body = json!({
                    "model": self.model_id,
                    "messages": [{"role": "user", "content": prompt}]
                });
                if let Some(t) = self.temperature {
                    body["temperature"] = json!(t);
                }
                HttpRequest {
                    method: Method::Post,
                    url: format!("{}/chat/completions", self.base),
                    headers: vec![("Authorization".into(), format!("Bearer {}", self.api_key))],
                    body: Some(body),
                }
            }
        }
    }
}

fn extract_text(provider: Provider, reply: &Value) -> String {
    match provider {
        Provider::Gemini => reply["candidates"][0]["content"]["parts"]
            .as_array()
            .map(|parts| {
                parts
                    .iter()
                    .filter_map(|p| p["text"].as_str())
                    .collect::<Vec<_>>()
                    .join("")
            })
            .unwrap_or_default(),
        _ => reply["choices"][0]["message"]["content"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
    }
}

impl Analyzer for ChatClient {
    fn exchange(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let reply = self.transport.send(&self.build(&request.prompt))?;
        let value = json_or_error(reply)?;
        let text = extract_text(self.provider, &value);
        if text.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(text)
    }
}
