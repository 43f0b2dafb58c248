//! The HTTP backend against a local one-request-per-connection stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde_json::Value;

use acsa::llm::{
    BackendKind, ChatRequest, HttpBackend, LlmClient, LlmError, ResponseCache, RetryPolicy,
};

struct Captured {
    path: String,
    auth: Option<String>,
    body: Value,
}

/// Serves `replies` (status, body) in order and records each request.
fn stub(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line
                .split_whitespace()
                .nth(1)
                .unwrap_or_default()
                .to_string();
            let (mut len, mut auth) = (0, None);
            loop {
                line.clear();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let (name, value) = l.split_once(':').unwrap();
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => len = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                path,
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut out = stream;
            write!(
                out,
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn completion(text: &str) -> String {
    serde_json::json!({
        "id": "x",
        "object": "chat.completion",
        "choices": [{"index": 0, "finish_reason": "stop", "message": {"role": "assistant", "content": text}}]
    })
    .to_string()
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 2,
        base_delay: Duration::from_millis(1),
        max_delay: Duration::from_millis(5),
    }
}

#[test]
fn sends_greedy_chat_completion_and_caches() {
    let (url, seen) = stub(vec![(200, completion("[('food', 'positive')]"))]);
    let backend = HttpBackend::new(&url, Some("secret".into()), Duration::from_secs(10)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let client = LlmClient::new(Box::new(backend)).with_cache(ResponseCache::new(dir.path()));
    let req = ChatRequest::new("qwen3-8b", "sys", "user text");

    let first = client.chat(&req).unwrap();
    assert_eq!(first.backend, BackendKind::Http);
    assert_eq!(first.text, "[('food', 'positive')]");
    let second = client.chat(&req).unwrap();
    assert_eq!(second.backend, BackendKind::Cache);
    assert_eq!(second.text, first.text);
    assert_eq!(second.request_hash, req.cache_key());

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    let c = &seen[0];
    assert_eq!(c.path, "/v1/chat/completions");
    assert_eq!(c.auth.as_deref(), Some("Bearer secret"));
    assert_eq!(c.body["model"], "qwen3-8b");
    assert_eq!(c.body["temperature"], 0.0);
    assert_eq!(c.body["top_p"], 1.0);
    assert_eq!(c.body["max_tokens"], 4096);
    assert_eq!(c.body["messages"][0]["role"], "system");
    assert_eq!(c.body["messages"][1]["content"], "user text");
}

#[test]
fn rate_limits_are_retried() {
    let (url, seen) = stub(vec![
        (429, "{}".into()),
        (429, "{}".into()),
        (200, completion("ok")),
    ]);
    let backend = HttpBackend::new(&url, None, Duration::from_secs(10)).unwrap();
    let client = LlmClient::new(Box::new(backend)).with_retry(fast_retry());
    assert_eq!(
        client.chat(&ChatRequest::new("m", "s", "u")).unwrap().text,
        "ok"
    );
    assert_eq!(seen.lock().unwrap().len(), 3);
    assert!(seen.lock().unwrap()[0].auth.is_none());
}

#[test]
fn error_statuses_map_to_kinds() {
    let (url, _) = stub(vec![
        (401, r#"{"error":"bad key"}"#.into()),
        (400, r#"{"error":"context length exceeded"}"#.into()),
        (503, "unavailable".into()),
        (
            200,
            r#"{"choices":[{"finish_reason":"content_filter","message":{"content":null}}]}"#.into(),
        ),
    ]);
    let backend = HttpBackend::new(&url, None, Duration::from_secs(10)).unwrap();
    let client = LlmClient::new(Box::new(backend)).with_retry(fast_retry());
    let req = |u: &str| ChatRequest::new("m", "s", u);
    assert!(matches!(client.chat(&req("a")), Err(LlmError::Auth(_))));
    assert!(matches!(
        client.chat(&req("b")),
        Err(LlmError::BackendRefused(_))
    ));
    assert!(matches!(
        client.chat(&req("c")),
        Err(LlmError::Transport(_))
    ));
    assert!(matches!(
        client.chat(&req("d")),
        Err(LlmError::BackendRefused(_))
    ));
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let backend = HttpBackend::new(
        &format!("http://127.0.0.1:{port}"),
        None,
        Duration::from_secs(2),
    )
    .unwrap();
    let client = LlmClient::new(Box::new(backend));
    assert!(matches!(
        client.chat(&ChatRequest::new("m", "s", "u")),
        Err(LlmError::Transport(_))
    ));
}
