//! Shared test utilities: a minimal chat-completion server on localhost.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use serde_json::Value;
use tsexam::core::exam::Exam;
use tsexam::harness::{serialize_values, ModelEndpoint, RetryPolicy};

#[derive(Clone)]
pub enum Mode {
    /// Looks the question series up in a table built from the keys.
    Oracle(Arc<HashMap<String, char>>),
    /// Uniform letter among the listed options, keyed by a hash of the
    /// request so concurrent runs stay reproducible.
    Random(u64),
    Constant(String),
    /// Replies 503 to the first `n` requests, then behaves like `then`.
    FailFirst(usize, Box<Mode>),
    /// Replies with an arbitrary status code.
    Status(u16),
    /// Replies 200 with a body that is not a chat completion.
    Garbage,
}

pub struct MockServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    /// Arrival time of each request.
    pub log: Arc<Mutex<Vec<Instant>>>,
    /// Parsed request bodies.
    pub bodies: Arc<Mutex<Vec<Value>>>,
    pub auth: Arc<Mutex<Vec<Option<String>>>>,
}

impl MockServer {
    pub fn start(mode: Mode) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let log = Arc::new(Mutex::new(Vec::new()));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let auth = Arc::new(Mutex::new(Vec::new()));
        let (r, l, b, a) = (requests.clone(), log.clone(), bodies.clone(), auth.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (mode, r, l, b, a) = (mode.clone(), r.clone(), l.clone(), b.clone(), a.clone());
                thread::spawn(move || {
                    let _ = handle(stream, &mode, &r, &l, &b, &a);
                });
            }
        });
        MockServer { url, requests, log, bodies, auth }
    }

    pub fn endpoint(&self, name: &str) -> ModelEndpoint {
        let mut e = ModelEndpoint::new(name, &self.url, "mock-model");
        e.retry = RetryPolicy { max_retries: 3, initial_backoff_ms: 5, max_backoff_ms: 20 };
        e.timeout_secs = 10.0;
        e
    }

    pub fn count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

/// Oracle table: serialized question series → correct letter.
pub fn oracle_table(exam: &Exam) -> Arc<HashMap<String, char>> {
    let mut map = HashMap::new();
    for item in &exam.items {
        let letter = (b'A' + item.correct_index as u8) as char;
        for s in &item.series {
            map.insert(serialize_values(s.values()), letter);
        }
    }
    Arc::new(map)
}

fn user_text(body: &Value) -> String {
    let Some(messages) = body.get("messages").and_then(Value::as_array) else { return String::new() };
    let mut out = String::new();
    for m in messages.iter().filter(|m| m["role"] == "user") {
        match &m["content"] {
            Value::String(s) => out.push_str(s),
            Value::Array(parts) => {
                for p in parts {
                    if let Some(t) = p.get("text").and_then(Value::as_str) {
                        out.push_str(t);
                        out.push('\n');
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn fnv(s: &str, seed: u64) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ seed;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51afd7ed558ccd);
    h ^ (h >> 33)
}

/// Letters of the options listed after the last series line.
fn option_count(text: &str) -> usize {
    let lines: Vec<&str> = text.lines().collect();
    let tail_start = lines.iter().rposition(|l| is_series_line(l)).map_or(0, |i| i + 1);
    lines[tail_start..]
        .iter()
        .filter(|l| {
            let b = l.as_bytes();
            b.len() >= 3 && b[0].is_ascii_uppercase() && b[1] == b'.' && b[2] == b' '
        })
        .count()
}

fn is_series_line(l: &str) -> bool {
    !l.is_empty() && l.contains(',') && l.split(',').all(|t| t.parse::<f64>().is_ok())
}

fn answer(mode: &Mode, body: &Value, n: usize) -> (u16, String) {
    let chat = |text: &str| {
        let v = serde_json::json!({
            "id": "mock", "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 1, "total_tokens": 11}
        });
        (200, v.to_string())
    };
    match mode {
        Mode::Oracle(table) => {
            let text = user_text(body);
            let hit = text.lines().filter(|l| is_series_line(l)).filter_map(|l| table.get(l)).last();
            match hit {
                Some(c) => chat(&c.to_string()),
                None => chat("I don't know"),
            }
        }
        Mode::Random(seed) => {
            let text = user_text(body);
            let k = option_count(&text).max(1);
            let c = (b'A' + (fnv(&text, *seed) % k as u64) as u8) as char;
            chat(&c.to_string())
        }
        Mode::Constant(s) => chat(s),
        Mode::FailFirst(k, then) => {
            if n < *k {
                (503, r#"{"error":"busy"}"#.to_string())
            } else {
                answer(then, body, n)
            }
        }
        Mode::Status(code) => (*code, r#"{"error":"nope"}"#.to_string()),
        Mode::Garbage => (200, r#"{"unexpected":true}"#.to_string()),
    }
}

fn handle(
    stream: TcpStream,
    mode: &Mode,
    requests: &AtomicUsize,
    log: &Mutex<Vec<Instant>>,
    bodies: &Mutex<Vec<Value>>,
    auth: &Mutex<Vec<Option<String>>>,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut length = 0usize;
    let mut authorization = None;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h)?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = v.trim().parse().unwrap_or(0),
                "authorization" => authorization = Some(v.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut buf = vec![0u8; length];
    reader.read_exact(&mut buf)?;
    let n = requests.fetch_add(1, Ordering::SeqCst);
    log.lock().unwrap().push(Instant::now());
    auth.lock().unwrap().push(authorization);
    let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
    let (status, reply) = answer(mode, &body, n);
    bodies.lock().unwrap().push(body);
    let mut s = stream;
    write!(
        s,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )?;
    s.flush()
}
