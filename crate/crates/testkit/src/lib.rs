//! Local HTTP stand-ins for chat, embedding and translation endpoints.
//!
//! Each [`MockServer`] listens on an ephemeral loopback port and serves every
//! request on its own thread, so concurrency limits of the client can be
//! observed through [`MockServer::max_in_flight`].

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossnli::lexicon::Lexicon;
use crossnli::logic::classify_pair;
use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

#[derive(Debug, Clone)]
pub struct Request {
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or(Value::Null)
    }

    /// Content of the first chat message.
    pub fn prompt(&self) -> Option<String> {
        self.json()
            .pointer("/messages/0/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn ok(body: impl Into<String>) -> Self {
        Reply {
            status: 200,
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        Reply {
            status,
            body: json!({"error": {"message": format!("mock status {status}")}}).to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn chat(content: &str) -> Self {
        Reply::ok(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string())
    }

    pub fn after(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

pub type Handler = Arc<dyn Fn(&Request) -> Reply + Send + Sync>;

#[derive(Default)]
struct Stats {
    count: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    log: Mutex<Vec<Request>>,
}

pub struct MockServer {
    server: Arc<Server>,
    url: String,
    stats: Arc<Stats>,
    accept: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&Request) -> Reply + Send + Sync + 'static) -> Self {
        let handler: Handler = Arc::new(handler);
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind loopback"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let stats = Arc::new(Stats::default());
        let accept = {
            let (server, stats) = (server.clone(), stats.clone());
            thread::spawn(move || {
                while let Ok(mut raw) = server.recv() {
                    let (handler, stats) = (handler.clone(), stats.clone());
                    thread::spawn(move || {
                        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                        stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
                        let mut body = String::new();
                        let _ = raw.as_reader().read_to_string(&mut body);
                        let request = Request {
                            path: raw.url().to_owned(),
                            headers: raw
                                .headers()
                                .iter()
                                .map(|h| (h.field.to_string(), h.value.to_string()))
                                .collect(),
                            body,
                        };
                        stats.count.fetch_add(1, Ordering::SeqCst);
                        stats.log.lock().unwrap().push(request.clone());
                        let reply = handler(&request);
                        thread::sleep(reply.delay);
                        let content_type =
                            Header::from_bytes("Content-Type", "application/json").unwrap();
                        let response = Response::from_string(reply.body)
                            .with_status_code(reply.status)
                            .with_header(content_type);
                        stats.in_flight.fetch_sub(1, Ordering::SeqCst);
                        let _ = raw.respond(response);
                    });
                }
            })
        };
        MockServer {
            server,
            url: format!("http://127.0.0.1:{port}"),
            stats,
            accept: Some(accept),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn request_count(&self) -> usize {
        self.stats.count.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.stats.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<Request> {
        self.stats.log.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.accept.take() {
            let _ = t.join();
        }
    }
}

/// Extracts the text after `prefix` on the first line that starts with it.
pub fn prompt_line<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix))
}

/// Label word the logic oracle assigns to a prompt, recovering both
/// statements from their surface text in whichever language they are in.
pub fn oracle_answer(lexicon: &Lexicon, prompt: &str) -> Option<&'static str> {
    let premise = lexicon.parse_any(prompt_line(prompt, "Premise: ")?).ok()?.0;
    let hypothesis = lexicon
        .parse_any(prompt_line(prompt, "Hypothesis: ")?)
        .ok()?
        .0;
    Some(classify_pair(&premise, &hypothesis).ok()?.answer_word())
}

/// Chat endpoint that always answers correctly.
pub fn oracle_chat(lexicon: Lexicon) -> impl Fn(&Request) -> Reply + Send + Sync {
    move |req| match req.prompt().and_then(|p| oracle_answer(&lexicon, &p)) {
        Some(word) => Reply::chat(word),
        None => Reply::status(400),
    }
}

pub fn constant_chat(content: &str) -> impl Fn(&Request) -> Reply + Send + Sync {
    let content = content.to_owned();
    move |_| Reply::chat(&content)
}

/// Answers with `status` for the first `n` requests, then delegates.
pub fn fail_first(
    n: usize,
    status: u16,
    inner: impl Fn(&Request) -> Reply + Send + Sync,
) -> impl Fn(&Request) -> Reply + Send + Sync {
    let seen = AtomicUsize::new(0);
    move |req| {
        if seen.fetch_add(1, Ordering::SeqCst) < n {
            Reply::status(status)
        } else {
            inner(req)
        }
    }
}

/// Delegates for the first `n` requests, then answers with `status` forever.
pub fn fail_after(
    n: usize,
    status: u16,
    inner: impl Fn(&Request) -> Reply + Send + Sync,
) -> impl Fn(&Request) -> Reply + Send + Sync {
    let seen = AtomicUsize::new(0);
    move |req| {
        if seen.fetch_add(1, Ordering::SeqCst) < n {
            inner(req)
        } else {
            Reply::status(status)
        }
    }
}

/// Recovery switch returned by [`outage_after`].
#[derive(Debug, Clone, Default)]
pub struct Outage(Arc<AtomicBool>);

impl Outage {
    pub fn heal(&self) {
        self.0.store(true, Ordering::SeqCst);
    }
}

/// Like [`fail_after`], but the endpoint recovers once the outage is healed.
pub fn outage_after(
    n: usize,
    status: u16,
    inner: impl Fn(&Request) -> Reply + Send + Sync,
) -> (impl Fn(&Request) -> Reply + Send + Sync, Outage) {
    let outage = Outage::default();
    let healed = outage.0.clone();
    let seen = AtomicUsize::new(0);
    let handler = move |req: &Request| {
        if healed.load(Ordering::SeqCst) || seen.fetch_add(1, Ordering::SeqCst) < n {
            inner(req)
        } else {
            Reply::status(status)
        }
    };
    (handler, outage)
}

pub fn slow(
    delay: Duration,
    inner: impl Fn(&Request) -> Reply + Send + Sync,
) -> impl Fn(&Request) -> Reply + Send + Sync {
    move |req| inner(req).after(delay)
}

fn embedding_inputs(req: &Request) -> Vec<String> {
    req.json()
        .get("input")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(|v| v.as_str().map(str::to_owned))
                .collect()
        })
        .unwrap_or_default()
}

fn embedding_reply(vectors: Vec<Vec<f64>>) -> Reply {
    let data: Vec<Value> = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| json!({"object": "embedding", "index": i, "embedding": v}))
        .collect();
    Reply::ok(json!({"object": "list", "data": data}).to_string())
}

/// Embeddings endpoint returning `vector` for every input.
pub fn constant_embeddings(vector: Vec<f64>) -> impl Fn(&Request) -> Reply + Send + Sync {
    move |req| embedding_reply(vec![vector.clone(); embedding_inputs(req).len()])
}

/// Deterministic pseudo-embedding of `dim` components derived from a hash of the text.
pub fn hashed_vector(text: &str, dim: usize) -> Vec<f64> {
    let digest = crossnli::sha256_hex(text.as_bytes());
    let bytes = digest.as_bytes();
    (0..dim)
        .map(|i| f64::from(bytes[i % bytes.len()]) - 80.0 + i as f64)
        .collect()
}

pub fn hashed_embeddings(dim: usize) -> impl Fn(&Request) -> Reply + Send + Sync {
    move |req| {
        embedding_reply(
            embedding_inputs(req)
                .iter()
                .map(|t| hashed_vector(t, dim))
                .collect(),
        )
    }
}

/// Translation endpoint that upper-cases its input.
pub fn uppercase_mt() -> impl Fn(&Request) -> Reply + Send + Sync {
    |req| {
        let v = req.json();
        match v.get("text").and_then(Value::as_str) {
            Some(text) => Reply::ok(json!({"translation": text.to_uppercase()}).to_string()),
            None => Reply::status(400),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_reads_mixed_language_prompts() {
        let lex = Lexicon::seed();
        let prompt =
            crossnli::eval::build_prompt("All zombies are animals.", "Einige Zombies sind Tiere.");
        assert_eq!(oracle_answer(&lex, &prompt), Some("Entailment"));
    }
}
