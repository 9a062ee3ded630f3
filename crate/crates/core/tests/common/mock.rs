//! Minimal blocking HTTP/1.1 server standing in for a completions endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

/// Reply chosen by a handler: status code and JSON body.
pub type Reply = (u16, String);

pub struct MockServer {
    pub base_url: String,
    pub calls: Arc<AtomicUsize>,
    pub bodies: Arc<std::sync::Mutex<Vec<String>>>,
}

/// Serves forever on an ephemeral port. The handler sees the call number
/// (from 0) and the request body.
pub fn spawn<F>(handler: F) -> MockServer
where
    F: Fn(usize, &str) -> Reply + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
    let addr = listener.local_addr().unwrap();
    let calls = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
    let handler = Arc::new(handler);
    {
        let calls = calls.clone();
        let bodies = bodies.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (calls, bodies, handler) = (calls.clone(), bodies.clone(), handler.clone());
                thread::spawn(move || {
                    let _ = serve(stream, &calls, &bodies, handler.as_ref());
                });
            }
        });
    }
    MockServer {
        base_url: format!("http://{addr}/v1"),
        calls,
        bodies,
    }
}

fn serve<F>(
    stream: TcpStream,
    calls: &AtomicUsize,
    bodies: &std::sync::Mutex<Vec<String>>,
    handler: &F,
) -> std::io::Result<()>
where
    F: Fn(usize, &str) -> Reply,
{
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body).into_owned();
    let n = calls.fetch_add(1, Ordering::SeqCst);
    let (status, reply) = handler(n, &body);
    bodies.lock().unwrap().push(body);
    let reason = if status == 200 { "OK" } else { "Error" };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )?;
    out.flush()
}

/// Chat-completions response body carrying `text`.
pub fn chat_reply(text: &str) -> String {
    serde_json::json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}).to_string()
}
