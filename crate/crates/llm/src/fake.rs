//! A scripted chat-completion server on a local socket, for tests and demos.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum FakeReply {
    /// A normal completion whose assistant message is this text.
    Content(String),
    /// An HTTP error status with an empty body.
    Status(u16),
    /// Waits before answering, to trip client timeouts.
    Delayed(Duration, Box<FakeReply>),
}

type Script = dyn Fn(usize, &Value) -> FakeReply + Send + Sync;

struct Shared {
    script: Box<Script>,
    requests: Mutex<Vec<Value>>,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    stop: AtomicBool,
}

pub struct FakeEndpoint {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: Option<JoinHandle<()>>,
}

/// The user prompt inside a chat-completion request body.
pub fn prompt_of(body: &Value) -> &str {
    body.pointer("/messages/0/content").and_then(Value::as_str).unwrap_or_default()
}

impl FakeEndpoint {
    /// Starts serving. `script` gets the zero-based request index and the
    /// parsed request body.
    pub fn start<F>(script: F) -> io::Result<Self>
    where
        F: Fn(usize, &Value) -> FakeReply + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            script: Box::new(script),
            requests: Mutex::new(Vec::new()),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            stop: AtomicBool::new(false),
        });
        let s = Arc::clone(&shared);
        let accept = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if s.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let s = Arc::clone(&s);
                std::thread::spawn(move || {
                    let _ = serve(stream, &s);
                });
            }
        });
        Ok(Self { addr, shared, accept: Some(accept) })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> Vec<Value> {
        self.shared.requests.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn request_count(&self) -> usize {
        self.shared.requests.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Highest number of requests seen in flight at once.
    pub fn peak_concurrency(&self) -> usize {
        self.shared.peak.load(Ordering::SeqCst)
    }
}

impl Drop for FakeEndpoint {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn read_request(stream: &TcpStream) -> io::Result<Value> {
    let mut reader = BufReader::new(stream);
    let mut len = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    serde_json::from_slice(&body).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

fn respond(stream: &mut TcpStream, reply: FakeReply, prompt: &str) -> io::Result<()> {
    match reply {
        FakeReply::Delayed(d, inner) => {
            std::thread::sleep(d);
            respond(stream, *inner, prompt)
        }
        FakeReply::Status(code) => {
            write!(stream, "HTTP/1.1 {code} Error\r\nContent-Length: 0\r\nConnection: close\r\n\r\n")
        }
        FakeReply::Content(text) => {
            let body = json!({
                "id": "fake",
                "object": "chat.completion",
                "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
                "usage": {"prompt_tokens": word_count(prompt), "completion_tokens": word_count(&text)},
            })
            .to_string();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
        }
    }
}

fn serve(mut stream: TcpStream, s: &Shared) -> io::Result<()> {
    if s.stop.load(Ordering::SeqCst) {
        return Ok(());
    }
    let body = read_request(&stream)?;
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.peak.fetch_max(now, Ordering::SeqCst);
    let index = {
        let mut reqs = s.requests.lock().unwrap_or_else(|e| e.into_inner());
        reqs.push(body.clone());
        reqs.len() - 1
    };
    let reply = (s.script)(index, &body);
    let out = respond(&mut stream, reply, prompt_of(&body));
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
    out?;
    stream.flush()
}
