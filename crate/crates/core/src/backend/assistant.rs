//! Stateful assistant sessions: create a thread, post the prompt, start a
//! run, poll it to a terminal state, read the reply, discard the thread.
//!
//! Every case gets a fresh session so nothing carries over between cases.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use serde_json::{json, Value};

use super::chat::endpoint_base;
use super::clock::Clock;
use super::http::{json_or_error, HttpRequest, HttpTransport, Method};
use super::{Analyzer, BackendDescriptor, BackendError, CompletionRequest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Queued,
    InProgress,
    Completed,
    Failed(String),
}

impl RunStatus {
    /// Maps a service status string. Anything terminal other than
    /// `completed` counts as a failure, since runs never call tools.
    pub fn from_wire(status: &str, detail: Option<&str>) -> RunStatus {
        match status {
            "queued" => RunStatus::Queued,
            "in_progress" | "cancelling" => RunStatus::InProgress,
            "completed" => RunStatus::Completed,
            other => RunStatus::Failed(match detail {
                Some(d) => format!("{other}: {d}"),
                None => other.to_string(),
            }),
        }
    }

    fn is_terminal(&self) -> bool {
        matches!(self, RunStatus::Completed | RunStatus::Failed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunHandle {
    pub id: String,
    pub status: RunStatus,
}

/// The lifecycle operations of an assistant service.
pub trait AssistantService: Send + Sync {
    fn create_session(&self) -> Result<String, BackendError>;
    fn post_message(&self, session: &str, prompt: &str) -> Result<(), BackendError>;
    fn start_run(&self, session: &str) -> Result<RunHandle, BackendError>;
    fn poll_run(&self, session: &str, run: &str) -> Result<RunStatus, BackendError>;
    fn final_message(&self, session: &str) -> Result<String, BackendError>;
    /// Best effort; failures are logged, not returned.
    fn discard(&self, session: &str);
}

struct Discard<'a> {
    service: &'a dyn AssistantService,
    session: String,
}

impl Drop for Discard<'_> {
    fn drop(&mut self) {
        self.service.discard(&self.session);
    }
}

/// Runs one prompt through a fresh session and returns the final reply.
pub fn run_assistant_exchange(
    service: &dyn AssistantService,
    prompt: &str,
    max_wait: Duration,
    poll_interval: Duration,
    clock: &dyn Clock,
) -> Result<String, BackendError> {
    let start = clock.now();
    let session = service.create_session()?;
    let _discard = Discard {
        service,
        session: session.clone(),
    };
    service.post_message(&session, prompt)?;
    let run = service.start_run(&session)?;
    let mut status = run.status;
    while !status.is_terminal() {
        if clock.now().saturating_sub(start) >= max_wait {
            return Err(BackendError::Timeout(format!(
                "run {} still {:?} after {max_wait:?}",
                run.id, status
            )));
        }
        clock.sleep(poll_interval);
        status = service.poll_run(&session, &run.id)?;
    }
    match status {
        RunStatus::Completed => service.final_message(&session),
        RunStatus::Failed(reason) => Err(BackendError::RunFailed(reason)),
        _ => unreachable!("loop exits on terminal status"),
    }
}

pub struct AssistantClient {
    service: Box<dyn AssistantService>,
    clock: Arc<dyn Clock>,
    poll_interval: Duration,
}

impl AssistantClient {
    pub fn new(service: Box<dyn AssistantService>, clock: Arc<dyn Clock>, poll_interval: Duration) -> Self {
        AssistantClient {
            service,
            clock,
            poll_interval,
        }
    }
}

impl Analyzer for AssistantClient {
    fn exchange(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        run_assistant_exchange(
            self.service.as_ref(),
            &request.prompt,
            request.max_wait,
            self.poll_interval,
            self.clock.as_ref(),
        )
    }
}

/// OpenAI Assistants API (v2 beta headers).
pub struct OpenAiAssistants {
    base: String,
    api_key: String,
    model_id: String,
    temperature: Option<f64>,
    assistant_id: OnceLock<String>,
    create_lock: std::sync::Mutex<()>,
    transport: Arc<dyn HttpTransport>,
}

impl OpenAiAssistants {
    pub fn new(descriptor: &BackendDescriptor, api_key: String, transport: Arc<dyn HttpTransport>) -> Self {
        let assistant_id = OnceLock::new();
        if let Some(id) = &descriptor.assistant_id {
            let _ = assistant_id.set(id.clone());
        }
        OpenAiAssistants {
            base: endpoint_base(descriptor),
            api_key,
            model_id: descriptor.model_id.clone(),
            temperature: descriptor.temperature,
            assistant_id,
            create_lock: std::sync::Mutex::new(()),
            transport,
        }
    }

    fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<Value, BackendError> {
        let request = HttpRequest {
            method,
            url: format!("{}{}", self.base, path),
            headers: vec![
                ("Authorization".into(), format!("Bearer {}", self.api_key)),
                ("OpenAI-Beta".into(), "assistants=v2".into()),
            ],
            body,
        };
        json_or_error(self.transport.send(&request)?)
    }

    fn assistant(&self) -> Result<&str, BackendError> {
        if let Some(id) = self.assistant_id.get() {
            return Ok(id);
        }
        let _guard = self.create_lock.lock().unwrap();
        if let Some(id) = self.assistant_id.get() {
            return Ok(id);
        }
        let mut body = json!({ "model": self.model_id, "name": "sastbench" });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        let reply = self.call(Method::Post, "/assistants", Some(body))?;
        let id = string_field(&reply, "id")?;
        Ok(self.assistant_id.get_or_init(|| id))
    }
}

fn string_field(value: &Value, field: &str) -> Result<String, BackendError> {
    value[field]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| BackendError::Transport(format!("reply is missing `{field}`")))
}

fn run_status(value: &Value) -> Result<RunStatus, BackendError> {
    let status = string_field(value, "status")?;
    Ok(RunStatus::from_wire(&status, value["last_error"]["message"].as_str()))
}

impl AssistantService for OpenAiAssistants {
    fn create_session(&self) -> Result<String, BackendError> {
        let reply = self.call(Method::Post, "/threads", Some(json!({})))?;
        string_field(&reply, "id")
    }

    fn post_message(&self, session: &str, prompt: &str) -> Result<(), BackendError> {
        self.call(
            Method::Post,
            &format!("/threads/{session}/messages"),
            Some(json!({ "role": "user", "content": prompt })),
        )?;
        Ok(())
    }

    fn start_run(&self, session: &str) -> Result<RunHandle, BackendError> {
        let assistant_id = self.assistant()?.to_string();
        let reply = self.call(
            Method::Post,
            &format!("/threads/{session}/runs"),
            Some(json!({ "assistant_id": assistant_id })),
        )?;
        Ok(RunHandle {
            id: string_field(&reply, "id")?,
            status: run_status(&reply)?,
        })
    }

    fn poll_run(&self, session: &str, run: &str) -> Result<RunStatus, BackendError> {
        run_status(&self.call(Method::Get, &format!("/threads/{session}/runs/{run}"), None)?)
    }

    fn final_message(&self, session: &str) -> Result<String, BackendError> {
        let reply = self.call(
            Method::Get,
            &format!("/threads/{session}/messages?order=desc&limit=1"),
            None,
        )?;
        let message = &reply["data"][0];
        if message["role"].as_str() != Some("assistant") {
            return Err(BackendError::EmptyResponse);
        }
        let text = message["content"]
            .as_array()
            .map(|parts| {
                parts
                    .iter()
                    .filter(|p| p["type"] == "text")
                    .filter_map(|p| p["text"]["value"].as_str())
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .unwrap_or_default();
        if text.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(text)
    }

    fn discard(&self, session: &str) {
        if let Err(e) = self.call(Method::Delete, &format!("/threads/{session}"), None) {
            log::warn!("could not delete assistant thread {session}: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::clock::VirtualClock;
    use crate::backend::http::testing::QueueTransport;
    use crate::backend::{ApiKind, Provider};
    use std::collections::VecDeque;
    use std::sync::Mutex;

    /// Scripted service: fixed start status, then a poll sequence.
    struct FakeService {
        start: RunStatus,
        polls: Mutex<VecDeque<RunStatus>>,
        poll_count: Mutex<usize>,
        sessions: Mutex<Vec<String>>,
        discarded: Mutex<Vec<String>>,
    }

    impl FakeService {
        fn new(start: RunStatus, polls: Vec<RunStatus>) -> Self {
            FakeService {
                start,
                polls: Mutex::new(polls.into()),
                poll_count: Mutex::new(0),
                sessions: Mutex::new(Vec::new()),
                discarded: Mutex::new(Vec::new()),
            }
        }
    }

    impl AssistantService for FakeService {
        fn create_session(&self) -> Result<String, BackendError> {
            let mut s = self.sessions.lock().unwrap();
            let id = format!("thread_{}", s.len());
            s.push(id.clone());
            Ok(id)
        }
        fn post_message(&self, _: &str, _: &str) -> Result<(), BackendError> {
            Ok(())
        }
        fn start_run(&self, _: &str) -> Result<RunHandle, BackendError> {
            Ok(RunHandle {
                id: "run_1".into(),
                status: self.start.clone(),
            })
        }
        fn poll_run(&self, _: &str, _: &str) -> Result<RunStatus, BackendError> {
            *self.poll_count.lock().unwrap() += 1;
            Ok(self.polls.lock().unwrap().pop_front().unwrap_or(RunStatus::InProgress))
        }
        fn final_message(&self, session: &str) -> Result<String, BackendError> {
            Ok(format!("hash,51,md5 ({session})"))
        }
        fn discard(&self, session: &str) {
            self.discarded.lock().unwrap().push(session.to_string());
        }
    }

    const WAIT: Duration = Duration::from_secs(60);
    const POLL: Duration = Duration::from_secs(1);

    #[test]
    fn polls_until_completed() {
        let svc = FakeService::new(
            RunStatus::Queued,
            vec![RunStatus::InProgress, RunStatus::InProgress, RunStatus::Completed],
        );
        let clock = VirtualClock::new();
        let text = run_assistant_exchange(&svc, "p", WAIT, POLL, &clock).unwrap();
        assert_eq!(text, "hash,51,md5 (thread_0)");
        assert_eq!(*svc.poll_count.lock().unwrap(), 3);
        assert_eq!(*svc.discarded.lock().unwrap(), ["thread_0"]);
    }

    #[test]
    fn failed_run_is_run_failed() {
        let svc = FakeService::new(
            RunStatus::Queued,
            vec![RunStatus::InProgress, RunStatus::Failed("server_error".into())],
        );
        let clock = VirtualClock::new();
        let err = run_assistant_exchange(&svc, "p", WAIT, POLL, &clock).unwrap_err();
        assert_eq!(err, BackendError::RunFailed("server_error".into()));
        assert_eq!(svc.discarded.lock().unwrap().len(), 1);
    }

    #[test]
    fn immediate_completion_needs_no_poll() {
        let svc = FakeService::new(RunStatus::Completed, vec![]);
        let clock = VirtualClock::new();
        assert!(run_assistant_exchange(&svc, "p", WAIT, POLL, &clock).is_ok());
        assert_eq!(*svc.poll_count.lock().unwrap(), 0);
    }

    #[test]
    fn never_finishing_run_times_out() {
        let svc = FakeService::new(RunStatus::Queued, vec![]);
        let clock = VirtualClock::new();
        let err = run_assistant_exchange(&svc, "p", Duration::from_secs(5), POLL, &clock).unwrap_err();
        assert!(matches!(err, BackendError::Timeout(_)));
        assert_eq!(*svc.poll_count.lock().unwrap(), 5);
    }

    #[test]
    fn each_case_gets_a_fresh_session() {
        let svc = FakeService::new(RunStatus::Completed, vec![]);
        let clock = VirtualClock::new();
        let a = run_assistant_exchange(&svc, "a", WAIT, POLL, &clock).unwrap();
        let b = run_assistant_exchange(&svc, "b", WAIT, POLL, &clock).unwrap();
        assert_ne!(a, b);
        assert_eq!(*svc.discarded.lock().unwrap(), ["thread_0", "thread_1"]);
    }

    #[test]
    fn openai_assistant_wire_sequence() {
        let transport = Arc::new(QueueTransport::with(vec![
            (200, json!({"id": "thread_a"})),
            (200, json!({"id": "msg_1"})),
            (200, json!({"id": "asst_1"})),
            (200, json!({"id": "run_1", "status": "queued"})),
            (200, json!({"id": "run_1", "status": "completed"})),
            (200, json!({"data": [{"role": "assistant", "content": [{"type": "text", "text": {"value": "xss,3,echo"}}]}]})),
            (200, json!({"deleted": true})),
        ]));
        let mut d = BackendDescriptor::new("A", "gpt-4-1106-preview", ApiKind::Assistant, Provider::OpenAi);
        d.api_base = Some("http://h/v1".into());
        let svc = OpenAiAssistants::new(&d, "k".into(), transport.clone());
        let clock = VirtualClock::new();
        let text = run_assistant_exchange(&svc, "prompt", WAIT, POLL, &clock).unwrap();
        assert_eq!(text, "xss,3,echo");
        let seen = transport.seen.lock().unwrap();
        let urls: Vec<_> = seen.iter().map(|r| (r.method, r.url.as_str())).collect();
        assert_eq!(
            urls,
            [
                (Method::Post, "http://h/v1/threads"),
                (Method::Post, "http://h/v1/threads/thread_a/messages"),
                (Method::Post, "http://h/v1/assistants"),
                (Method::Post, "http://h/v1/threads/thread_a/runs"),
                (Method::Get, "http://h/v1/threads/thread_a/runs/run_1"),
                (Method::Get, "http://h/v1/threads/thread_a/messages?order=desc&limit=1"),
                (Method::Delete, "http://h/v1/threads/thread_a"),
            ]
        );
        assert_eq!(seen[3].body.as_ref().unwrap()["assistant_id"], "asst_1");
        assert!(seen.iter().all(|r| r.headers.iter().any(|(k, v)| k == "OpenAI-Beta" && v == "assistants=v2")));
    }

    #[test]
    fn wire_status_mapping() {
        assert_eq!(RunStatus::from_wire("completed", None), RunStatus::Completed);
        assert_eq!(
            RunStatus::from_wire("expired", None),
            RunStatus::Failed("expired".into())
        );
        assert_eq!(
            RunStatus::from_wire("failed", Some("rate limit")),
            RunStatus::Failed("failed: rate limit".into())
        );
    }
}
