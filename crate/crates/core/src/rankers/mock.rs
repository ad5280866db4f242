//! A scripted in-process HTTP endpoint speaking the rerank wire protocol.
//!
//! Useful for exercising [`RemoteRanker`](super::RemoteRanker) without a
//! model server: each incoming request consumes the next scripted [`Reply`],
//! falling back to a default once the script runs out.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

#[derive(Debug, Clone)]
pub enum Reply {
    /// Candidates in the order received.
    Echo,
    /// Candidates reversed.
    Reverse,
    /// Input order with the last docno replaced by the first.
    Duplicate,
    /// An empty body with this status code.
    Status(u16),
    /// A 200 response whose body is not JSON.
    Garbage,
    /// Sleep, then answer with the default reply.
    Delay(Duration),
}

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub path: String,
    pub authorization: Option<String>,
    pub body: serde_json::Value,
}

struct Shared {
    script: Vec<Reply>,
    fallback: Reply,
    next: AtomicUsize,
    last: Mutex<Option<RecordedRequest>>,
    stop: AtomicBool,
}

pub struct MockRankServer {
    addr: std::net::SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl MockRankServer {
    pub fn start(script: Vec<Reply>, fallback: Reply) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().expect("local addr");
        let shared = Arc::new(Shared {
            script,
            fallback,
            next: AtomicUsize::new(0),
            last: Mutex::new(None),
            stop: AtomicBool::new(false),
        });
        let s = Arc::clone(&shared);
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if s.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let s = Arc::clone(&s);
                std::thread::spawn(move || {
                    let _ = serve(conn, &s);
                });
            }
        });
        Self {
            addr,
            shared,
            handle: Some(handle),
        }
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far.
    pub fn requests(&self) -> usize {
        self.shared.next.load(Ordering::SeqCst)
    }

    pub fn last_request(&self) -> Option<RecordedRequest> {
        self.shared.last.lock().ok()?.clone()
    }
}

impl Drop for MockRankServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(conn: TcpStream, shared: &Shared) -> std::io::Result<()> {
    let mut reader = BufReader::new(conn.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    if request_line.trim().is_empty() {
        return Ok(());
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim().to_string();
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.parse().unwrap_or(0),
                "authorization" => authorization = Some(value),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);

    let n = shared.next.fetch_add(1, Ordering::SeqCst);
    let mut reply = shared
        .script
        .get(n)
        .cloned()
        .unwrap_or_else(|| shared.fallback.clone());
    if let Reply::Delay(d) = reply {
        std::thread::sleep(d);
        reply = shared.fallback.clone();
    }
    let docnos: Vec<serde_json::Value> = body["candidates"]
        .as_array()
        .map(|c| c.iter().map(|x| x["docno"].clone()).collect())
        .unwrap_or_default();
    if let Ok(mut last) = shared.last.lock() {
        *last = Some(RecordedRequest {
            path,
            authorization,
            body,
        });
    }

    let (status, payload) = match reply {
        Reply::Echo => (200, serde_json::json!({ "ordering": docnos }).to_string()),
        Reply::Reverse => {
            let rev: Vec<_> = docnos.into_iter().rev().collect();
            (200, serde_json::json!({ "ordering": rev }).to_string())
        }
        Reply::Duplicate => {
            let mut dup = docnos;
            if let (Some(first), Some(_)) = (dup.first().cloned(), dup.last()) {
                *dup.last_mut().unwrap() = first;
            }
            (200, serde_json::json!({ "ordering": dup }).to_string())
        }
        Reply::Status(code) => (code, String::new()),
        Reply::Garbage => (200, "not json".to_string()),
        Reply::Delay(_) => unreachable!(),
    };
    let mut conn = conn;
    write!(
        conn,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    conn.flush()
}
