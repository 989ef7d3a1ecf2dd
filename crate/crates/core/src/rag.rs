//! Prompt construction, retrieval-grounded answers and policy-level article
//! mapping.
//!
//! The supporting article list always comes from retrieval. A generation
//! backend only produces the answer text, so swapping backends never changes
//! which articles a policy is mapped to.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::policy::{PolicyDocument, PolicySegment};
use crate::regulation::ArticleChunk;
use crate::retrieval::{aggregate_articles, Index, RetrievalHit, RetrieverConfig};

pub const QUESTION: &str = "Which GDPR article does this privacy policy relate to?";
pub const NO_MATCH_ANSWER: &str = "No GDPR article matched above the configured threshold.";
pub const EXTRACTIVE_BACKEND: &str = "extractive";
pub const EXTERNAL_BACKEND: &str = "external";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RagError {
    #[error("generation backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("policy `{0}` has no segments left to map")]
    UpstreamEmptyPolicy(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub question: String,
    pub context_text: String,
    pub rendered: String,
}

pub fn build_prompt(segment: &PolicySegment) -> Prompt {
    Prompt {
        question: QUESTION.to_string(),
        context_text: segment.text.clone(),
        rendered: format!("{QUESTION}\n{}", segment.text),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedResponse {
    pub answer_text: String,
    /// `(article_number, best score)` sorted by score, then article.
    pub supporting_articles: Vec<(u32, f64)>,
    pub backend_used: String,
}

impl GeneratedResponse {
    pub fn article_set(&self) -> BTreeSet<u32> {
        self.supporting_articles.iter().map(|(a, _)| *a).collect()
    }
}

/// Produces answer text from a prompt and the retrieved chunks. Errors must
/// be reported, never replaced with made-up text.
pub trait GeneratorBackend: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, prompt: &Prompt, chunks: &[&ArticleChunk]) -> Result<String, RagError>;
}

/// Offline backend: lists the matched articles followed by the first
/// sentence of each article's best chunk.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveBackend;

impl GeneratorBackend for ExtractiveBackend {
    fn id(&self) -> &str {
        EXTRACTIVE_BACKEND
    }

    fn generate(&self, _prompt: &Prompt, chunks: &[&ArticleChunk]) -> Result<String, RagError> {
        if chunks.is_empty() {
            return Ok(NO_MATCH_ANSWER.to_string());
        }
        let numbers: Vec<String> = chunks.iter().map(|c| c.article_number.to_string()).collect();
        let mut out = format!("Related GDPR articles: {}.", numbers.join(", "));
        for c in chunks {
            out.push_str(&format!("\n[Art. {}] {}", c.article_number, first_sentence(&c.text)));
        }
        Ok(out)
    }
}

/// Text up to and including the first `.`, `!` or `?` that ends the text or
/// is followed by whitespace; the whole text (on one line) otherwise.
pub fn first_sentence(text: &str) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut chars = flat.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|(_, n)| n.is_whitespace()) {
            return flat[..i + c.len_utf8()].to_string();
        }
    }
    flat
}

/// Index-ordered best chunk per article, in the order of `articles`.
fn best_chunks<'a>(index: &'a Index, hits: &[RetrievalHit], articles: &[(u32, f64)]) -> Vec<&'a ArticleChunk> {
    articles
        .iter()
        .filter_map(|(a, _)| {
            hits.iter()
                .find(|h| h.article_number == *a)
                .and_then(|h| index.chunk(&h.chunk_id))
        })
        .collect()
}

fn supporting_articles(hits: &[RetrievalHit]) -> Vec<(u32, f64)> {
    let mut v: Vec<(u32, f64)> = aggregate_articles(hits).into_iter().collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

/// Retrieval plus generation for one segment.
pub fn answer(
    segment: &PolicySegment,
    index: &Index,
    config: &RetrieverConfig,
    backend: &dyn GeneratorBackend,
) -> Result<GeneratedResponse, RagError> {
    let prompt = build_prompt(segment);
    let hits = index.retrieve(&prompt.context_text, config);
    let articles = supporting_articles(&hits);
    let chunks = best_chunks(index, &hits, &articles);
    let answer_text = backend.generate(&prompt, &chunks)?;
    Ok(GeneratedResponse {
        answer_text,
        supporting_articles: articles,
        backend_used: backend.id().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMapping {
    pub segment_id: String,
    pub articles: Vec<(u32, f64)>,
    /// `None` when the backend failed for this segment.
    pub response: Option<GeneratedResponse>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendFailure {
    pub segment_id: String,
    pub error: RagError,
    /// Backend that produced the answer instead, if any.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyArticleMap {
    pub provider_id: String,
    /// Union of the per-segment article sets.
    pub articles: BTreeSet<u32>,
    pub segments: BTreeMap<String, SegmentMapping>,
    pub failures: Vec<BackendFailure>,
}

impl PolicyArticleMap {
    pub fn segment_articles(&self, segment_id: &str) -> Option<BTreeSet<u32>> {
        self.segments
            .get(segment_id)
            .map(|s| s.articles.iter().map(|(a, _)| *a).collect())
    }

    pub fn is_complete(&self) -> bool {
        self.failures.iter().all(|f| f.fallback.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapOptions {
    /// Maximum number of segments answered concurrently.
    pub max_concurrent: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions { max_concurrent: 4 }
    }
}

/// Maps every segment of a policy to articles. Backend failures are
/// collected in `failures`; the segment's article set is still recorded
/// because it does not depend on the backend.
pub fn map_policy_to_articles(
    policy: &PolicyDocument,
    index: &Index,
    config: &RetrieverConfig,
    backend: &dyn GeneratorBackend,
) -> Result<PolicyArticleMap, RagError> {
    map_policy_with_fallback(policy, index, config, backend, None, &MapOptions::default())
}

/// As [`map_policy_to_articles`], re-answering failed segments with
/// `fallback` when given.
pub fn map_policy_with_fallback(
    policy: &PolicyDocument,
    index: &Index,
    config: &RetrieverConfig,
    backend: &dyn GeneratorBackend,
    fallback: Option<&dyn GeneratorBackend>,
    options: &MapOptions,
) -> Result<PolicyArticleMap, RagError> {
    if policy.segments.is_empty() {
        return Err(RagError::UpstreamEmptyPolicy(policy.provider_id.clone()));
    }

    let answer_one = |seg: &PolicySegment| -> (SegmentMapping, Option<BackendFailure>) {
        let prompt = build_prompt(seg);
        let hits = index.retrieve(&prompt.context_text, config);
        let articles = supporting_articles(&hits);
        let chunks = best_chunks(index, &hits, &articles);
        let make = |b: &dyn GeneratorBackend, text: String| GeneratedResponse {
            answer_text: text,
            supporting_articles: articles.clone(),
            backend_used: b.id().to_string(),
        };
        match backend.generate(&prompt, &chunks) {
            Ok(text) => (
                SegmentMapping {
                    segment_id: seg.segment_id.clone(),
                    articles: articles.clone(),
                    response: Some(make(backend, text)),
                },
                None,
            ),
            Err(error) => {
                let rescued = fallback.and_then(|fb| fb.generate(&prompt, &chunks).ok().map(|t| (fb, t)));
                let failure = BackendFailure {
                    segment_id: seg.segment_id.clone(),
                    error,
                    fallback: rescued.as_ref().map(|(fb, _)| fb.id().to_string()),
                };
                (
                    SegmentMapping {
                        segment_id: seg.segment_id.clone(),
                        articles: articles.clone(),
                        response: rescued.map(|(fb, t)| make(fb, t)),
                    },
                    Some(failure),
                )
            }
        }
    };

    let width = options.max_concurrent.max(1);
    let mut results: Vec<(SegmentMapping, Option<BackendFailure>)> = Vec::with_capacity(policy.segments.len());
    for batch in policy.segments.chunks(width) {
        if batch.len() == 1 {
            results.push(answer_one(&batch[0]));
            continue;
        }
        thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|seg| s.spawn(|| answer_one(seg))).collect();
            for h in handles {
                results.push(h.join().expect("segment worker panicked"));
            }
        });
    }

    let mut out = PolicyArticleMap {
        provider_id: policy.provider_id.clone(),
        articles: BTreeSet::new(),
        segments: BTreeMap::new(),
        failures: Vec::new(),
    };
    for (mapping, failure) in results {
        out.articles.extend(mapping.articles.iter().map(|(a, _)| *a));
        out.segments.insert(mapping.segment_id.clone(), mapping);
        out.failures.extend(failure);
    }
    out.failures.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    Ok(out)
}

/// Request line sent to an external generator: the rendered prompt plus the
/// retrieved chunk texts, as one JSON string literal.
pub fn external_request_line(prompt: &Prompt, chunks: &[&ArticleChunk]) -> String {
    let mut text = prompt.rendered.clone();
    if !chunks.is_empty() {
        text.push_str("\n\nContext:");
        for c in chunks {
            text.push_str(&format!("\n[{}] {}", c.chunk_id, c.text));
        }
    }
    serde_json::Value::String(text).to_string()
}

/// Decodes a response line: a JSON string literal, or raw text.
pub fn decode_response_line(line: &str) -> Result<String, RagError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let text = if line.starts_with('"') {
        serde_json::from_str::<String>(line)
            .map_err(|e| RagError::BackendUnavailable(format!("undecodable response: {e}")))?
    } else {
        line.to_string()
    };
    if text.trim().is_empty() {
        return Err(RagError::BackendUnavailable("empty response".into()));
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `tcp://host:port`
    Tcp(String),
    /// Shell command speaking the protocol on stdin/stdout.
    Command(String),
}

impl Endpoint {
    pub fn parse(spec: &str) -> Endpoint {
        match spec.strip_prefix("tcp://") {
            Some(addr) => Endpoint::Tcp(addr.to_string()),
            None => Endpoint::Command(spec.to_string()),
        }
    }
}

enum Connection {
    Tcp(BufReader<TcpStream>),
    Process {
        child: Child,
        stdin: ChildStdin,
        lines: Receiver<std::io::Result<String>>,
    },
}

impl Connection {
    fn close(self) {
        if let Connection::Process { mut child, stdin, .. } = self {
            drop(stdin);
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

#[derive(Default)]
struct ClientState {
    conn: Option<Connection>,
    tripped: Option<String>,
}

/// Line-delimited client for an external generation service. After the
/// first failure the client stays unavailable and fails fast.
pub struct ExternalBackend {
    endpoint: Endpoint,
    timeout: Duration,
    state: Mutex<ClientState>,
}

impl ExternalBackend {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        ExternalBackend {
            endpoint,
            timeout,
            state: Mutex::new(ClientState::default()),
        }
    }

    fn connect(&self) -> Result<Connection, String> {
        match &self.endpoint {
            Endpoint::Tcp(addr) => {
                let sock = addr
                    .to_socket_addrs()
                    .map_err(|e| format!("resolve {addr}: {e}"))?
                    .next()
                    .ok_or_else(|| format!("no address for {addr}"))?;
                let stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(|e| format!("connect {addr}: {e}"))?;
                stream.set_read_timeout(Some(self.timeout)).map_err(|e| e.to_string())?;
                stream.set_write_timeout(Some(self.timeout)).map_err(|e| e.to_string())?;
                Ok(Connection::Tcp(BufReader::new(stream)))
            }
            Endpoint::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()
                    .map_err(|e| format!("spawn `{cmd}`: {e}"))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let (tx, rx) = mpsc::channel();
                thread::spawn(move || {
                    for line in BufReader::new(stdout).lines() {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                });
                Ok(Connection::Process {
                    child,
                    stdin,
                    lines: rx,
                })
            }
        }
    }

    fn exchange(&self, conn: &mut Connection, request: &str) -> Result<String, String> {
        match conn {
            Connection::Tcp(reader) => {
                let stream = reader.get_mut();
                stream
                    .write_all(request.as_bytes())
                    .and_then(|_| stream.write_all(b"\n"))
                    .and_then(|_| stream.flush())
                    .map_err(|e| format!("send: {e}"))?;
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => Err("connection closed".into()),
                    Ok(_) => Ok(line),
                    Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                        Err(format!("timed out after {} ms", self.timeout.as_millis()))
                    }
                    Err(e) => Err(format!("receive: {e}")),
                }
            }
            Connection::Process { stdin, lines, .. } => {
                stdin
                    .write_all(request.as_bytes())
                    .and_then(|_| stdin.write_all(b"\n"))
                    .and_then(|_| stdin.flush())
                    .map_err(|e| format!("send: {e}"))?;
                match lines.recv_timeout(self.timeout) {
                    Ok(Ok(line)) => Ok(line),
                    Ok(Err(e)) => Err(format!("receive: {e}")),
                    Err(RecvTimeoutError::Timeout) => Err(format!("timed out after {} ms", self.timeout.as_millis())),
                    Err(RecvTimeoutError::Disconnected) => Err("service exited".into()),
                }
            }
        }
    }
}

impl GeneratorBackend for ExternalBackend {
    fn id(&self) -> &str {
        EXTERNAL_BACKEND
    }

    fn generate(&self, prompt: &Prompt, chunks: &[&ArticleChunk]) -> Result<String, RagError> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(reason) = &state.tripped {
            return Err(RagError::BackendUnavailable(reason.clone()));
        }
        let request = external_request_line(prompt, chunks);
        let result = (|| {
            if state.conn.is_none() {
                state.conn = Some(self.connect()?);
            }
            let conn = state.conn.as_mut().expect("connected above");
            self.exchange(conn, &request)
        })();
        let failure = match result {
            Ok(line) => match decode_response_line(&line) {
                Ok(text) => return Ok(text),
                Err(RagError::BackendUnavailable(msg)) => msg,
                Err(other) => other.to_string(),
            },
            Err(msg) => msg,
        };
        if let Some(conn) = state.conn.take() {
            conn.close();
        }
        state.tripped = Some(failure.clone());
        Err(RagError::BackendUnavailable(failure))
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        let state = self.state.get_mut().unwrap_or_else(|e| e.into_inner());
        if let Some(conn) = state.conn.take() {
            conn.close();
        }
    }
}
