//! Minimal chat-completions stub server for offline HTTP tests.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Behavior of the stub per request index (1-based).
pub type ResponsePlan = Arc<dyn Fn(u64) -> (u16, String) + Send + Sync>;

pub struct StubServer {
    pub url: String,
    pub requests: Arc<AtomicU64>,
    // read by the concurrency tests only
    #[allow(dead_code)]
    pub max_in_flight: Arc<AtomicU64>,
}

/// A well-formed chat-completions body wrapping `content`.
pub fn completion_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

fn read_request(stream: &mut std::net::TcpStream) -> std::io::Result<()> {
    let mut buf = Vec::new();
    let mut tmp = [0u8; 1024];
    let mut content_length = 0usize;
    let mut header_end = None;
    loop {
        let n = stream.read(&mut tmp)?;
        if n == 0 {
            break;
        }
        buf.extend_from_slice(&tmp[..n]);
        if header_end.is_none() {
            if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                header_end = Some(pos + 4);
                let headers = String::from_utf8_lossy(&buf[..pos]);
                for line in headers.lines() {
                    let lower = line.to_ascii_lowercase();
                    if let Some(rest) = lower.strip_prefix("content-length:") {
                        content_length = rest.trim().parse().unwrap_or(0);
                    }
                }
            }
        }
        if let Some(end) = header_end {
            if buf.len() >= end + content_length {
                break;
            }
        }
    }
    Ok(())
}

/// Spawn a stub that answers according to `plan`. The listener thread is
/// detached and dies with the test process.
pub fn spawn_stub(plan: ResponsePlan) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub listener");
    let addr = listener.local_addr().unwrap();
    let requests = Arc::new(AtomicU64::new(0));
    let max_in_flight = Arc::new(AtomicU64::new(0));
    let in_flight = Arc::new(AtomicU64::new(0));

    {
        let requests = requests.clone();
        let max_in_flight = max_in_flight.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let n = requests.fetch_add(1, Ordering::SeqCst) + 1;
                let plan = plan.clone();
                let in_flight = in_flight.clone();
                let max_in_flight = max_in_flight.clone();
                std::thread::spawn(move || {
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    max_in_flight.fetch_max(now, Ordering::SeqCst);
                    let _ = read_request(&mut stream);
                    std::thread::sleep(std::time::Duration::from_millis(5));
                    let (status, body) = plan(n);
                    let reason = match status {
                        200 => "OK",
                        429 => "Too Many Requests",
                        _ => "Error",
                    };
                    let response = format!(
                        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = stream.write_all(response.as_bytes());
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
    }

    StubServer {
        url: format!("http://{addr}/v1/chat/completions"),
        requests,
        max_in_flight,
    }
}
