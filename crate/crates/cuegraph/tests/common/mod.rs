//! Shared test support: a minimal counting HTTP server and a corpus of
//! model-response shapes for the answer parser.

#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

pub struct ParsedRequest {
    pub method: String,
    pub path: String,
    /// Header names lowercased.
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl ParsedRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        let name = name.to_ascii_lowercase();
        self.headers
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("request body is JSON")
    }
}

pub struct CannedResponse {
    pub status: u16,
    pub body: String,
}

impl CannedResponse {
    /// A 200 whose body carries `text` in the model-response shape.
    pub fn text(text: &str) -> CannedResponse {
        CannedResponse {
            status: 200,
            body: serde_json::json!({ "text": text }).to_string(),
        }
    }

    pub fn status(status: u16, body: &str) -> CannedResponse {
        CannedResponse {
            status,
            body: body.to_string(),
        }
    }
}

/// One-connection-at-a-time HTTP server that counts requests and answers
/// from a caller-supplied function of (request index, request).
pub struct MockServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<ParsedRequest>>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(respond: F) -> MockServer
    where
        F: Fn(usize, &ParsedRequest) -> CannedResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));

        let thread_hits = hits.clone();
        let thread_requests = requests.clone();
        let thread_stop = stop.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(mut stream) = stream else { continue };
                let Some(request) = read_request(&mut stream) else {
                    continue;
                };
                let index = thread_hits.fetch_add(1, Ordering::SeqCst);
                let response = respond(index, &request);
                thread_requests.lock().unwrap().push(request);
                let payload = format!(
                    "HTTP/1.1 {} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    response.status,
                    response.body.len(),
                    response.body
                );
                let _ = stream.write_all(payload.as_bytes());
                let _ = stream.flush();
            }
        });

        MockServer {
            addr,
            hits,
            requests,
            stop,
            handle: Some(handle),
        }
    }

    /// Server that answers every request 200 with the given response text.
    pub fn always(text: &'static str) -> MockServer {
        MockServer::start(move |_, _| CannedResponse::text(text))
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/infer", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Requests seen so far, oldest first.
    pub fn requests(&self) -> Vec<serde_json::Value> {
        self.requests
            .lock()
            .unwrap()
            .iter()
            .map(ParsedRequest::json)
            .collect()
    }

    pub fn last_header(&self, name: &str) -> Option<String> {
        self.requests
            .lock()
            .unwrap()
            .last()
            .and_then(|r| r.header(name).map(str::to_string))
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn read_request(stream: &mut TcpStream) -> Option<ParsedRequest> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        match find_blank_line(&buf) {
            Some(i) => break i,
            None => {
                let n = stream.read(&mut chunk).ok()?;
                if n == 0 {
                    return None;
                }
                buf.extend_from_slice(&chunk[..n]);
            }
        }
    };

    let head = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let mut lines = head.lines();
    let request_line = lines.next()?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let headers: Vec<(String, String)> = lines
        .filter_map(|l| {
            let (name, value) = l.split_once(':')?;
            Some((name.trim().to_ascii_lowercase(), value.trim().to_string()))
        })
        .collect();

    let content_length: usize = headers
        .iter()
        .find(|(n, _)| n == "content-length")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let body_start = header_end + 4;
    while buf.len() < body_start + content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
    }
    let body = String::from_utf8_lossy(&buf[body_start..body_start + content_length]).to_string();
    Some(ParsedRequest {
        method,
        path,
        headers,
        body,
    })
}

fn find_blank_line(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

/// Twenty response shapes a yes/no question realistically comes back in,
/// with the verdict each one carries.
pub const PARSE_CORPUS: [(&str, bool); 20] = [
    ("yes", true),
    ("no", false),
    ("Yes.", true),
    ("No!", false),
    ("YES", true),
    ("Final answer: yes", true),
    ("Final answer: no.", false),
    ("Answer: YES", true),
    ("The answer is yes", true),
    ("I would say no", false),
    ("Verdict: no", false),
    ("yes, there are two people talking to me", true),
    ("No, the room is empty.", false),
    (
        "The wearer is looking at a screen.\nNobody else is visible.\nFinal answer: no",
        false,
    ),
    (
        "Let me think step by step.\nTwo people face the camera and take turns speaking.\nSo the answer is yes.",
        true,
    ),
    ("Decision: yes", true),
    ("My conclusion: no", false),
    ("In short: yes, they are chatting.", true),
    ("Overall, actually, no. I am alone here.", false),
    ("Final answer: yes\nHope that helps!", true),
];
