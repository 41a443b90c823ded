//! Chat-completion gateway with live, record, replay and scripted modes.
//!
//! Every call, whatever the mode, is appended to an in-memory session
//! transcript. Replay lookup is keyed by the request hash and consumes stored
//! responses in order, so identical requests replay in their recorded order.

mod audit;
mod http;
mod transcript;
mod types;

use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use audit::{audit_transcript, AuditFinding, AuditReport};
pub use http::{HttpTransport, Transport, TransportError};
pub use transcript::{Transcript, TranscriptRecord};
pub use types::{ChatRequest, ChatResponse, FinishReason, Message, Role, Usage};

use crate::clock::{Clock, LogicalClock, SystemClock};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend failed after {attempts} attempt(s){}: {message}", .status.map(|s| format!(" (last status {s})")).unwrap_or_default())]
    Backend { attempts: u32, status: Option<u16>, message: String },
    #[error("replay miss for request `{tag}` (hash {hash})")]
    ReplayMiss { tag: String, hash: String },
    #[error("scripted backend exhausted at request `{tag}`")]
    ScriptedUnderflow { tag: String },
    #[error("invalid request `{tag}`: {message}")]
    InvalidRequest { tag: String, message: String },
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    #[default]
    Live,
    Scripted,
    Record,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 5, base_backoff_ms: 500, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based). `jitter` in `[-1, 1]`
    /// scales a ±25% perturbation of the exponential step; the result is
    /// capped at `max_backoff_ms`. Successive delays never decrease.
    pub fn delay(&self, retry: u32, jitter: f64) -> Duration {
        let step = (self.base_backoff_ms as f64) * 2f64.powi(retry.min(40) as i32);
        let jittered = step + jitter.clamp(-1.0, 1.0) * 0.25 * step;
        Duration::from_millis(jittered.min(self.max_backoff_ms as f64).max(0.0) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub credential_env: String,
    pub retry: RetryPolicy,
    pub timeout_ms: u64,
    pub model_hint: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Record target (record mode) or source (replay mode).
    pub transcript_path: Option<PathBuf>,
    /// Canned responses for scripted mode (JSON Lines).
    pub script_path: Option<PathBuf>,
    pub strict_hash: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            mode: BackendMode::Live,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            credential_env: "MERLEAN_API_KEY".into(),
            retry: RetryPolicy::default(),
            timeout_ms: 300_000,
            model_hint: "default".into(),
            temperature: 0.0,
            max_output_tokens: 16_384,
            transcript_path: None,
            script_path: None,
            strict_hash: false,
        }
    }
}

enum Backend {
    Live(Box<dyn Transport>),
    Record { transport: Box<dyn Transport>, sink: Mutex<File> },
    Replay(Mutex<HashMap<String, VecDeque<ChatResponse>>>),
    Scripted(Mutex<VecDeque<ChatResponse>>),
}

/// Shared entry point for every backend call in the pipeline.
pub struct Gateway {
    backend: Backend,
    retry: RetryPolicy,
    strict_hash: bool,
    model_hint: String,
    temperature: f64,
    max_output_tokens: u32,
    clock: Arc<dyn Clock>,
    session: Mutex<Transcript>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mode = match self.backend {
            Backend::Live(_) => "live",
            Backend::Record { .. } => "record",
            Backend::Replay(_) => "replay",
            Backend::Scripted(_) => "scripted",
        };
        f.debug_struct("Gateway").field("mode", &mode).finish_non_exhaustive()
    }
}

impl Gateway {
    fn with_backend(backend: Backend, config: &BackendConfig, clock: Arc<dyn Clock>) -> Gateway {
        Gateway {
            backend,
            retry: config.retry,
            strict_hash: config.strict_hash,
            model_hint: config.model_hint.clone(),
            temperature: config.temperature,
            max_output_tokens: config.max_output_tokens,
            clock,
            session: Mutex::new(Transcript::new()),
        }
    }

    /// Builds a gateway from configuration. Replay and scripted modes get a
    /// logical clock; live and record modes use wall time.
    pub fn from_config(config: &BackendConfig) -> Result<Gateway, GatewayError> {
        if matches!(config.mode, BackendMode::Live | BackendMode::Record)
            && std::env::var_os(&config.credential_env).is_none_or(|v| v.is_empty())
        {
            return Err(GatewayError::Config(format!(
                "environment variable {} holding the API key is not set",
                config.credential_env
            )));
        }
        let http = || -> Box<dyn Transport> {
            Box::new(HttpTransport::new(
                config.endpoint.clone(),
                config.credential_env.clone(),
                Duration::from_millis(config.timeout_ms),
            ))
        };
        match config.mode {
            BackendMode::Live => {
                Ok(Gateway::with_backend(Backend::Live(http()), config, Arc::new(SystemClock::new())))
            }
            BackendMode::Record => {
                let path = config
                    .transcript_path
                    .as_deref()
                    .ok_or_else(|| GatewayError::Config("record mode requires a transcript path".into()))?;
                Gateway::recording(http(), path, config)
            }
            BackendMode::Replay => {
                let path = config
                    .transcript_path
                    .as_deref()
                    .ok_or_else(|| GatewayError::Config("replay mode requires a transcript path".into()))?;
                let transcript = Transcript::load(path)?;
                Ok(Gateway::replay_with(&transcript, config))
            }
            BackendMode::Scripted => {
                let path = config
                    .script_path
                    .as_deref()
                    .ok_or_else(|| GatewayError::Config("scripted mode requires a response queue".into()))?;
                let responses = load_script(path)?;
                Ok(Gateway::scripted_with(responses, config))
            }
        }
    }

    /// Live gateway over an arbitrary transport (used with fake servers in tests).
    pub fn live(transport: Box<dyn Transport>, config: &BackendConfig) -> Gateway {
        Gateway::with_backend(Backend::Live(transport), config, Arc::new(SystemClock::new()))
    }

    pub fn recording(
        transport: Box<dyn Transport>,
        path: &Path,
        config: &BackendConfig,
    ) -> Result<Gateway, GatewayError> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let sink = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Gateway::with_backend(
            Backend::Record { transport, sink: Mutex::new(sink) },
            config,
            Arc::new(SystemClock::new()),
        ))
    }

    pub fn scripted(responses: impl IntoIterator<Item = ChatResponse>) -> Gateway {
        Gateway::scripted_with(responses, &BackendConfig::default())
    }

    pub fn scripted_with(responses: impl IntoIterator<Item = ChatResponse>, config: &BackendConfig) -> Gateway {
        Gateway::with_backend(
            Backend::Scripted(Mutex::new(responses.into_iter().collect())),
            config,
            Arc::new(LogicalClock::new()),
        )
    }

    pub fn replay(transcript: &Transcript) -> Gateway {
        Gateway::replay_with(transcript, &BackendConfig::default())
    }

    pub fn replay_with(transcript: &Transcript, config: &BackendConfig) -> Gateway {
        let mut store: HashMap<String, VecDeque<ChatResponse>> = HashMap::new();
        for r in transcript.records() {
            store.entry(r.hash.clone()).or_default().push_back(r.response.clone());
        }
        Gateway::with_backend(Backend::Replay(Mutex::new(store)), config, Arc::new(LogicalClock::new()))
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        Arc::clone(&self.clock)
    }

    /// A request carrying this gateway's sampling defaults.
    pub fn request(&self, tag: impl Into<String>, messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            messages,
            model_hint: self.model_hint.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            request_tag: tag.into(),
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate().map_err(|message| GatewayError::InvalidRequest {
            tag: request.request_tag.clone(),
            message,
        })?;
        let hash = request.hash(self.strict_hash);
        let response = match &self.backend {
            Backend::Live(transport) => self.send_with_retry(transport.as_ref(), request)?,
            Backend::Record { transport, .. } => self.send_with_retry(transport.as_ref(), request)?,
            Backend::Replay(store) => store
                .lock()
                .expect("replay store poisoned")
                .get_mut(&hash)
                .and_then(VecDeque::pop_front)
                .ok_or_else(|| GatewayError::ReplayMiss { tag: request.request_tag.clone(), hash: hash.clone() })?,
            Backend::Scripted(queue) => queue
                .lock()
                .expect("script queue poisoned")
                .pop_front()
                .ok_or_else(|| GatewayError::ScriptedUnderflow { tag: request.request_tag.clone() })?,
        };
        self.clock.advance(response.latency_ms);
        let record = TranscriptRecord {
            hash,
            tag: request.request_tag.clone(),
            request: request.clone(),
            response: response.clone(),
            t: self.clock.timestamp(),
        };
        let mut session = self.session.lock().expect("transcript poisoned");
        if let Backend::Record { sink, .. } = &self.backend {
            transcript::append_record(&mut sink.lock().expect("record sink poisoned"), &record)?;
        }
        session.push(record);
        Ok(response)
    }

    fn send_with_retry(&self, transport: &dyn Transport, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match transport.send(request) {
                Ok(response) => return Ok(response),
                Err(TransportError::Transient { status, message }) if attempt <= self.retry.max_retries => {
                    let delay = self.retry.delay(attempt - 1, rand::thread_rng().gen_range(-1.0..=1.0));
                    tracing::warn!(tag = %request.request_tag, ?status, %message, ?delay, "transient backend failure, retrying");
                    std::thread::sleep(delay);
                }
                Err(err) => {
                    return Err(GatewayError::Backend {
                        attempts: attempt,
                        status: err.status(),
                        message: err.message().to_string(),
                    })
                }
            }
        }
    }

    /// Snapshot of every call made through this gateway.
    pub fn transcript(&self) -> Transcript {
        self.session.lock().expect("transcript poisoned").clone()
    }

    /// Number of calls made so far.
    pub fn call_count(&self) -> usize {
        self.session.lock().expect("transcript poisoned").len()
    }

    /// Responses still queued (scripted mode) or unconsumed (replay mode).
    pub fn remaining(&self) -> usize {
        match &self.backend {
            Backend::Scripted(q) => q.lock().expect("script queue poisoned").len(),
            Backend::Replay(s) => s.lock().expect("replay store poisoned").values().map(VecDeque::len).sum(),
            _ => 0,
        }
    }
}

/// Failure of [`Gateway::ask_parsed`].
#[derive(Debug, thiserror::Error)]
pub enum AskError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("reply to `{tag}` unusable after {calls} call(s): {error}")]
    Unparseable { tag: String, calls: u32, error: String, last_reply: String },
}

impl Gateway {
    /// Sends `messages`, parsing the reply; on a parse failure the reply and
    /// a re-prompt (built from the error) are appended and the request is
    /// sent again, up to `budget` calls in total. Retries are tagged
    /// `<tag>/retry<k>`.
    pub fn ask_parsed<T>(
        &self,
        tag: &str,
        mut messages: Vec<Message>,
        budget: u32,
        reprompt: impl Fn(&str) -> String,
        mut parse: impl FnMut(&str) -> Result<T, String>,
    ) -> Result<T, AskError> {
        let mut calls = 0;
        loop {
            let call_tag = if calls == 0 { tag.to_string() } else { format!("{tag}/retry{calls}") };
            calls += 1;
            let reply = self.complete(&self.request(call_tag, messages.clone()))?.content;
            match parse(&reply) {
                Ok(v) => return Ok(v),
                Err(error) if calls >= budget.max(1) => {
                    return Err(AskError::Unparseable { tag: tag.to_string(), calls, error, last_reply: reply })
                }
                Err(error) => {
                    let follow_up = reprompt(&error);
                    messages.push(Message::assistant(if reply.trim().is_empty() { "(empty reply)".to_string() } else { reply }));
                    messages.push(Message::user(follow_up));
                }
            }
        }
    }
}

/// Loads a scripted response queue: one JSON value per line, either a bare
/// string (the content) or a response object.
pub fn load_script(path: &Path) -> Result<Vec<ChatResponse>, GatewayError> {
    let text = std::fs::read_to_string(path)?;
    parse_script(&text).map_err(|m| GatewayError::Config(format!("{}: {m}", path.display())))
}

pub fn parse_script(text: &str) -> Result<Vec<ChatResponse>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
            match value {
                serde_json::Value::String(s) => Ok(ChatResponse::text(s)),
                other => serde_json::from_value(other).map_err(|e| format!("line {}: {e}", n + 1)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn req(gw: &Gateway, content: &str) -> ChatRequest {
        gw.request("test", vec![Message::user(content)])
    }

    #[test]
    fn scripted_pops_in_order_then_underflows() {
        let gw = Gateway::scripted([ChatResponse::text("hello")]);
        let r = gw.complete(&req(&gw, "anything")).unwrap();
        assert_eq!(r.content, "hello");
        assert_eq!(gw.remaining(), 0);
        assert!(matches!(gw.complete(&req(&gw, "more")), Err(GatewayError::ScriptedUnderflow { .. })));
        assert_eq!(gw.call_count(), 1);
    }

    #[test]
    fn ask_parsed_reprompts_within_budget() {
        let parse = |s: &str| s.parse::<u32>().map_err(|e| e.to_string());
        let gw = Gateway::scripted([ChatResponse::text("nope"), ChatResponse::text("7")]);
        let v = gw.ask_parsed("n", vec![Message::user("number?")], 3, |e| format!("bad: {e}"), parse).unwrap();
        assert_eq!(v, 7);
        let t = gw.transcript();
        assert_eq!(t.len(), 2);
        assert_eq!(t.records()[1].tag, "n/retry1");
        let msgs = &t.records()[1].request.messages;
        assert_eq!(msgs.len(), 3);
        assert_eq!(msgs[1].content, "nope");
        assert!(msgs[2].content.starts_with("bad: "));

        let gw = Gateway::scripted(["a", "b", "c", "4"].map(ChatResponse::text));
        let err = gw.ask_parsed("n", vec![Message::user("number?")], 3, |e| e.to_string(), parse).unwrap_err();
        assert!(matches!(err, AskError::Unparseable { calls: 3, ref last_reply, .. } if last_reply == "c"));
        assert_eq!(gw.remaining(), 1);
    }

    #[test]
    fn replay_returns_identical_responses_in_order() {
        let rec = Gateway::scripted([ChatResponse::text("first"), ChatResponse::text("second")]);
        rec.complete(&req(&rec, "same")).unwrap();
        rec.complete(&req(&rec, "same")).unwrap();
        let recorded = rec.transcript();

        let gw = Gateway::replay(&recorded);
        let a = gw.complete(&req(&gw, "same")).unwrap();
        let b = gw.complete(&req(&gw, "same")).unwrap();
        assert_eq!(a, recorded.records()[0].response);
        assert_eq!(b, recorded.records()[1].response);
        assert_eq!(gw.transcript().to_jsonl(), recorded.to_jsonl());
        // a hash matched more often than stored is a miss
        assert!(matches!(gw.complete(&req(&gw, "same")), Err(GatewayError::ReplayMiss { .. })));
    }

    #[test]
    fn replay_miss_names_the_tag() {
        let gw = Gateway::replay(&Transcript::new());
        let err = gw.complete(&gw.request("extract:pass:1", vec![Message::user("x")])).unwrap_err();
        assert!(err.to_string().contains("extract:pass:1"));
    }

    #[test]
    fn invalid_request_is_rejected_before_backend() {
        let gw = Gateway::scripted([ChatResponse::text("x")]);
        let bad = gw.request("t", vec![]);
        assert!(matches!(gw.complete(&bad), Err(GatewayError::InvalidRequest { .. })));
        assert_eq!(gw.remaining(), 1);
    }

    #[test]
    fn backoff_is_monotone_and_capped() {
        let p = RetryPolicy { max_retries: 10, base_backoff_ms: 500, max_backoff_ms: 30_000 };
        for (lo, hi) in [(-1.0, 1.0), (1.0, -1.0), (0.0, 0.0)] {
            let mut prev = Duration::ZERO;
            for k in 0..12 {
                let j = if k % 2 == 0 { lo } else { hi };
                let d = p.delay(k, j);
                assert!(d >= prev, "retry {k}: {d:?} < {prev:?}");
                assert!(d <= Duration::from_millis(30_000));
                prev = d;
            }
        }
        assert_eq!(p.delay(0, 0.0), Duration::from_millis(500));
        assert_eq!(p.delay(0, 1.0), Duration::from_millis(625));
        assert_eq!(p.delay(20, 0.0), Duration::from_millis(30_000));
    }

    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
        status: u16,
    }

    impl Transport for Flaky {
        fn send(&self, _request: &ChatRequest) -> Result<ChatResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                let message = "busy".to_string();
                if self.status == 429 || self.status >= 500 {
                    Err(TransportError::Transient { status: Some(self.status), message })
                } else {
                    Err(TransportError::Fatal { status: Some(self.status), message })
                }
            } else {
                Ok(ChatResponse::text("ok"))
            }
        }
    }

    fn fast_config(max_retries: u32) -> BackendConfig {
        BackendConfig {
            retry: RetryPolicy { max_retries, base_backoff_ms: 1, max_backoff_ms: 4 },
            ..BackendConfig::default()
        }
    }

    #[test]
    fn retries_exhausted_reports_last_status() {
        let gw = Gateway::live(
            Box::new(Flaky { failures: 10, calls: AtomicUsize::new(0), status: 503 }),
            &fast_config(2),
        );
        match gw.complete(&req(&gw, "x")).unwrap_err() {
            GatewayError::Backend { attempts, status, .. } => {
                assert_eq!(attempts, 3);
                assert_eq!(status, Some(503));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let flaky = Flaky { failures: 1, calls: AtomicUsize::new(0), status: 400 };
        let gw = Gateway::live(Box::new(flaky), &fast_config(5));
        assert!(matches!(gw.complete(&req(&gw, "x")), Err(GatewayError::Backend { attempts: 1, .. })));
    }

    #[test]
    fn record_mode_appends_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let flaky = Flaky { failures: 0, calls: AtomicUsize::new(0), status: 200 };
        let gw = Gateway::recording(Box::new(flaky), &path, &fast_config(0)).unwrap();
        gw.complete(&req(&gw, "a")).unwrap();
        gw.complete(&req(&gw, "b")).unwrap();
        let loaded = Transcript::load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert!(loaded.hash_mismatches(false).is_empty());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.to_lowercase().contains("authorization"));
    }

    #[test]
    fn script_lines_accept_strings_and_objects() {
        let rs = parse_script("\"plain\"\n\n{\"content\":\"obj\",\"latency_ms\":5}\n").unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[1].latency_ms, 5);
        assert!(parse_script("{bad").is_err());
    }

    #[test]
    fn logical_clock_advances_by_latency() {
        let mut r = ChatResponse::text("x");
        r.latency_ms = 1200;
        let gw = Gateway::scripted([r]);
        gw.complete(&req(&gw, "q")).unwrap();
        assert_eq!(gw.clock().now_ms(), 1200);
        assert_eq!(gw.transcript().records()[0].t, "1970-01-01T00:00:01.200Z");
    }

    #[test]
    fn concurrent_calls_are_all_transcribed() {
        let gw = Arc::new(Gateway::scripted((0..64).map(|i| ChatResponse::text(i.to_string()))));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let gw = Arc::clone(&gw);
                s.spawn(move || {
                    for _ in 0..8 {
                        gw.complete(&req(&gw, "x")).unwrap();
                    }
                });
            }
        });
        let mut seen: Vec<u32> =
            gw.transcript().records().iter().map(|r| r.response.content.parse().unwrap()).collect();
        seen.sort();
        assert_eq!(seen, (0..64).collect::<Vec<_>>());
    }
}
