//! Analyzer backends behind one `complete` call.
//!
//! Every backend kind (remote chat, remote assistant, scripted replay and
//! the built-in rule engine) implements [`Analyzer`]. [`Backend`] wraps an
//! analyzer with the response cache, a rate limiter and retry with
//! exponential backoff.

pub mod assistant;
pub mod cache;
pub mod chat;
pub mod clock;
pub mod http;
pub mod limiter;
pub mod mock;
pub mod rules;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{CacheKey, ResponseCache};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use limiter::{RateLimit, RateLimiter, RetryPolicy};
pub use mock::{MockReplay, MockScript};
pub use rules::{rule_engine_analyze, RuleEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApiKind {
    ChatCompletion,
    Assistant,
    MockReplay,
    RuleEngine,
}

impl ApiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ApiKind::ChatCompletion => "ChatCompletion",
            ApiKind::Assistant => "Assistant",
            ApiKind::MockReplay => "MockReplay",
            ApiKind::RuleEngine => "RuleEngine",
        }
    }

    pub fn is_remote(self) -> bool {
        matches!(self, ApiKind::ChatCompletion | ApiKind::Assistant)
    }
}

/// Which vendor protocol a remote backend speaks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    #[default]
    OpenAi,
    Gemini,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub shorthand: String,
    pub model_id: String,
    pub api_kind: ApiKind,
    #[serde(default)]
    pub provider: Provider,
    /// Overrides the provider's default endpoint root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_base: Option<String>,
    /// Sampling temperature; `None` leaves the provider default in place.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Existing assistant to run against; one is created on first use otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assistant_id: Option<String>,
}

impl BackendDescriptor {
    pub fn new(shorthand: &str, model_id: &str, api_kind: ApiKind, provider: Provider) -> Self {
        BackendDescriptor {
            shorthand: shorthand.to_string(),
            model_id: model_id.to_string(),
            api_kind,
            provider,
            api_base: None,
            temperature: None,
            assistant_id: None,
        }
    }

    pub fn rule_engine() -> Self {
        Self::new("Rule Engine", "regex-rules-v1", ApiKind::RuleEngine, Provider::Local)
    }

    pub fn mock_replay() -> Self {
        Self::new("Mock Replay", "mock", ApiKind::MockReplay, Provider::Local)
    }

    /// The five model/API pairings plus the two local backends.
    pub fn builtins() -> Vec<BackendDescriptor> {
        use ApiKind::*;
        vec![
            Self::new("GPT-3.5-Turbo", "gpt-3.5-turbo", ChatCompletion, Provider::OpenAi),
            Self::new("GPT-4-Turbo", "gpt-4-1106-preview", ChatCompletion, Provider::OpenAi),
            Self::new("Gemini-Pro", "gemini-pro", ChatCompletion, Provider::Gemini),
            Self::new("GPT-3.5-Turbo Assistant", "gpt-3.5-turbo", Assistant, Provider::OpenAi),
            Self::new("GPT-4-Turbo Assistant", "gpt-4-1106-preview", Assistant, Provider::OpenAi),
            Self::rule_engine(),
            Self::mock_replay(),
        ]
    }

    /// Command-line name: the shorthand lowercased with spaces as dashes.
    pub fn slug(&self) -> String {
        self.shorthand.to_ascii_lowercase().replace(' ', "-")
    }

    /// Looks a builtin up by slug (`gpt-4-turbo-assistant`), shorthand, or
    /// the short aliases `rules` and `mock`.
    pub fn builtin(name: &str) -> Option<BackendDescriptor> {
        let wanted = name.trim().to_ascii_lowercase();
        let wanted = match wanted.as_str() {
            "rules" | "rule-engine" => "rule-engine".to_string(),
            "mock" | "mock-replay" => "mock-replay".to_string(),
            _ => wanted.replace(' ', "-"),
        };
        Self::builtins().into_iter().find(|d| d.slug() == wanted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub case_id: String,
    /// Upper bound on total time spent, including retries and polling.
    pub max_wait: Duration,
    /// Raw source of the case, for backends that analyze code directly.
    pub source_text: Option<String>,
}

impl CompletionRequest {
    pub fn new(case_id: &str, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            case_id: case_id.to_string(),
            max_wait: Duration::from_secs(300),
            source_text: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub text: String,
    pub latency: Duration,
    pub from_cache: bool,
    /// Exchanges attempted for this request; 1 for a cache hit.
    pub attempt_count: u32,
    pub cache_key: CacheKey,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("assistant run failed: {0}")]
    RunFailed(String),
    #[error("API error {status}: {message}")]
    Api { status: u16, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::RateLimited(_) | BackendError::Timeout(_) | BackendError::Transport(_) => {
                true
            }
            BackendError::Api { status, .. } => *status >= 500,
            _ => false,
        }
    }

    /// Short stable label used in run records and failure counts.
    pub fn tag(&self) -> &'static str {
        match self {
            BackendError::AuthFailure(_) => "auth_failure",
            BackendError::RateLimited(_) => "rate_limited",
            BackendError::Timeout(_) => "timeout",
            BackendError::EmptyResponse => "empty_response",
            BackendError::RunFailed(_) => "run_failed",
            BackendError::Api { .. } => "api_error",
            BackendError::Transport(_) => "transport",
            BackendError::Config(_) => "config",
            BackendError::Cache(_) => "cache",
        }
    }

    /// Errors that make every further request pointless.
    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::AuthFailure(_) | BackendError::Config(_))
    }
}

/// One analyzer exchange: prompt in, raw text out. No caching or retry.
pub trait Analyzer: Send + Sync {
    fn exchange(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

#[derive(Clone)]
pub struct BackendOptions {
    pub retry: RetryPolicy,
    pub rate_limit: Option<RateLimit>,
    pub cache: Option<Arc<ResponseCache>>,
    pub clock: Arc<dyn Clock>,
}

impl Default for BackendOptions {
    fn default() -> Self {
        BackendOptions {
            retry: RetryPolicy::default(),
            rate_limit: None,
            cache: None,
            clock: Arc::new(SystemClock::default()),
        }
    }
}

impl fmt::Debug for BackendOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendOptions")
            .field("retry", &self.retry)
            .field("rate_limit", &self.rate_limit)
            .field("cache", &self.cache.as_ref().map(|c| c.dir().to_path_buf()))
            .finish()
    }
}

/// Inputs needed to construct a concrete analyzer from a descriptor.
#[derive(Default, Clone)]
pub struct BackendSetup {
    pub mock_script: Option<MockScript>,
    /// Overrides the API key looked up from the environment.
    pub api_key: Option<String>,
    pub transport: Option<Arc<dyn http::HttpTransport>>,
    pub poll_interval: Option<Duration>,
}

/// Environment variable holding the credential for a provider.
pub fn credential_var(provider: Provider) -> Option<&'static str> {
    match provider {
        Provider::OpenAi => Some("OPENAI_API_KEY"),
        Provider::Gemini => Some("GEMINI_API_KEY"),
        Provider::Local => None,
    }
}

fn lookup_api_key(provider: Provider) -> Option<String> {
    let primary = credential_var(provider)?;
    std::env::var(primary)
        .ok()
        .or_else(|| match provider {
            Provider::Gemini => std::env::var("GOOGLE_API_KEY").ok(),
            _ => None,
        })
        .filter(|k| !k.trim().is_empty())
}

pub struct Backend {
    descriptor: BackendDescriptor,
    analyzer: Box<dyn Analyzer>,
    options: BackendOptions,
    limiter: Option<RateLimiter>,
    exchanges: AtomicU64,
    cache_hits: AtomicU64,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend")
            .field("descriptor", &self.descriptor)
            .field("options", &self.options)
            .finish()
    }
}

impl Backend {
    pub fn new(
        descriptor: BackendDescriptor,
        analyzer: Box<dyn Analyzer>,
        options: BackendOptions,
    ) -> Self {
        let limiter = options
            .rate_limit
            .map(|limit| RateLimiter::new(limit, options.clock.clone()));
        Backend {
            descriptor,
            analyzer,
            options,
            limiter,
            exchanges: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Builds the analyzer the descriptor names. Remote kinds need an API
    /// key, from `setup` or the provider's environment variable.
    pub fn from_descriptor(
        descriptor: BackendDescriptor,
        options: BackendOptions,
        setup: BackendSetup,
    ) -> Result<Self, BackendError> {
        let analyzer: Box<dyn Analyzer> = match descriptor.api_kind {
            ApiKind::RuleEngine => Box::new(RuleEngine),
            ApiKind::MockReplay => {
                let script = setup.mock_script.ok_or_else(|| {
                    BackendError::Config("mock replay backend needs a mock script".into())
                })?;
                Box::new(MockReplay::new(script))
            }
            kind => {
                let key = setup
                    .api_key
                    .or_else(|| lookup_api_key(descriptor.provider))
                    .ok_or_else(|| {
                        BackendError::Config(format!(
                            "no API key for {}; set {}",
                            descriptor.shorthand,
                            credential_var(descriptor.provider).unwrap_or("an API key")
                        ))
                    })?;
                let transport: Arc<dyn http::HttpTransport> = match setup.transport {
                    Some(t) => t,
                    None => Arc::new(http::ReqwestTransport::new(Duration::from_secs(120))?),
                };
                if kind == ApiKind::Assistant {
                    if descriptor.provider != Provider::OpenAi {
                        return Err(BackendError::Config(
                            "assistant sessions are only supported for OpenAI".into(),
                        ));
                    }
                    let service = assistant::OpenAiAssistants::new(&descriptor, key, transport);
                    Box::new(assistant::AssistantClient::new(
                        Box::new(service),
                        options.clock.clone(),
                        setup.poll_interval.unwrap_or(Duration::from_secs(1)),
                    ))
                } else {
                    Box::new(chat::ChatClient::new(&descriptor, key, transport)?)
                }
            }
        };
        Ok(Backend::new(descriptor, analyzer, options))
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn options(&self) -> &BackendOptions {
        &self.options
    }

    /// Number of exchanges handed to the analyzer (cache hits excluded).
    pub fn exchange_count(&self) -> u64 {
        self.exchanges.load(Ordering::SeqCst)
    }

    pub fn cache_hit_count(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn cache_key(&self, prompt: &str) -> CacheKey {
        CacheKey::new(&self.descriptor.model_id, self.descriptor.api_kind, prompt)
    }

    /// Cache lookup, then (on a miss) rate-limited exchange with retry,
    /// then cache store. Empty output is an error and is never cached.
    pub fn complete(&self, request: &CompletionRequest) -> Result<RawResponse, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::Config("empty prompt".into()));
        }
        let clock = &self.options.clock;
        let start = clock.now();
        let key = self.cache_key(&request.prompt);

        let key_lock = self.options.cache.as_ref().map(|c| c.key_lock(&key));
        let _guard = key_lock.as_ref().map(|l| l.lock().unwrap_or_else(|p| p.into_inner()));
        if let Some(cache) = &self.options.cache {
            if let Some(text) = cache.get(&key)? {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(RawResponse {
                    text,
                    latency: clock.now().saturating_sub(start),
                    from_cache: true,
                    attempt_count: 1,
                    cache_key: key,
                });
            }
        }

        let retry = self.options.retry;
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.exchanges.fetch_add(1, Ordering::SeqCst);
            match self.analyzer.exchange(request) {
                Ok(text) if text.trim().is_empty() => return Err(BackendError::EmptyResponse),
                Ok(text) => {
                    if let Some(cache) = &self.options.cache {
                        cache.put(&key, &self.descriptor.model_id, self.descriptor.api_kind, &text)?;
                    }
                    return Ok(RawResponse {
                        text,
                        latency: clock.now().saturating_sub(start),
                        from_cache: false,
                        attempt_count: attempts,
                        cache_key: key,
                    });
                }
                Err(err) if err.is_retryable() && attempts <= retry.max_retries => {
                    let delay = retry.delay(attempts);
                    let elapsed = clock.now().saturating_sub(start);
                    if elapsed + delay > request.max_wait {
                        return Err(match err {
                            BackendError::Timeout(_) => err,
                            other => BackendError::Timeout(format!(
                                "gave up after {attempts} attempts within {:?}: {other}",
                                request.max_wait
                            )),
                        });
                    }
                    log::debug!(
                        "{}: {} (attempt {attempts}), retrying in {delay:?}",
                        request.case_id,
                        err
                    );
                    clock.sleep(delay);
                }
                Err(err) => return Err(err),
            }
        }
    }
}

/// Free-function form of [`Backend::complete`].
pub fn complete(backend: &Backend, request: &CompletionRequest) -> Result<RawResponse, BackendError> {
    backend.complete(request)
}

impl FromStr for ApiKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "chatcompletion" | "chat" => Ok(ApiKind::ChatCompletion),
            "assistant" | "assistants" | "assistantsapi" => Ok(ApiKind::Assistant),
            "mockreplay" | "mock" => Ok(ApiKind::MockReplay),
            "ruleengine" | "rules" => Ok(ApiKind::RuleEngine),
            other => Err(format!("unknown api kind `{other}`")),
        }
    }
}
