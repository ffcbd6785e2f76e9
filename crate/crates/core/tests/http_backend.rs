//! The HTTP backend against a throwaway local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

use transolve::domains::{generate_dataset, DatasetCounts};
use transolve::eval::RecordStatus;
use transolve::harness::{
    run_assisted, ApiFlavor, Backend, BackendConfig, BackendError, ChatRequest, HttpBackend, RunOptions,
};
use transolve::solver::SolverConfig;

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    headers: Vec<(String, String)>,
    body: Value,
}

impl Seen {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

fn read_request(stream: &mut TcpStream) -> Seen {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut headers = Vec::new();
    let mut length = 0;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap();
            }
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    Seen { path, headers, body: serde_json::from_slice(&body).unwrap_or(Value::Null) }
}

/// Serves `responses` in order, one per connection, and records requests.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let req = read_request(&mut stream);
            log.lock().unwrap().push(req);
            let reason = if status == 200 { "OK" } else { "Error" };
            let extra = if status == 429 { "Retry-After: 0\r\n" } else { "" };
            let reply = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n{extra}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), seen)
}

fn config(url: &str, flavor: ApiFlavor) -> BackendConfig {
    BackendConfig {
        flavor,
        endpoint: format!("{url}/v1/{{model}}/chat"),
        model: "test-model".into(),
        auth_env: None,
        timeout_secs: 10.0,
        max_retries: 2,
        retry_backoff_ms: 1,
        parallelism: 1,
        ..BackendConfig::default()
    }
}

fn request() -> ChatRequest {
    ChatRequest::new("test-model", 1.0, "system text", "user text")
}

#[test]
fn openai_wire_format_and_bearer_auth() {
    let body = json!({"choices": [{"message": {"role": "assistant", "content": "{\"answer\": \"0.5\"}"}}]});
    let (url, seen) = serve(vec![(200, body.to_string())]);
    let backend = HttpBackend::with_token(config(&url, ApiFlavor::Openai), Some("sk-test".into())).unwrap();
    assert_eq!(backend.complete(&request()).unwrap(), "{\"answer\": \"0.5\"}");

    let seen = seen.lock().unwrap();
    let req = &seen[0];
    assert_eq!(req.path, "/v1/test-model/chat");
    assert_eq!(req.header("authorization"), Some("Bearer sk-test"));
    assert_eq!(req.body["model"], "test-model");
    assert_eq!(req.body["temperature"], 1.0);
    assert_eq!(req.body["messages"][0], json!({"role": "system", "content": "system text"}));
    assert_eq!(req.body["messages"][1], json!({"role": "user", "content": "user text"}));
}

#[test]
fn anthropic_and_gemini_adapters() {
    let (url, seen) = serve(vec![(200, json!({"content": [{"type": "text", "text": "hello"}]}).to_string())]);
    let backend = HttpBackend::with_token(config(&url, ApiFlavor::Anthropic), Some("k1".into())).unwrap();
    assert_eq!(backend.complete(&request()).unwrap(), "hello");
    {
        let seen = seen.lock().unwrap();
        assert_eq!(seen[0].header("x-api-key"), Some("k1"));
        assert!(seen[0].header("anthropic-version").is_some());
        assert_eq!(seen[0].body["system"], "system text");
    }

    let reply = json!({"candidates": [{"content": {"parts": [{"text": "hi"}]}}]});
    let (url, seen) = serve(vec![(200, reply.to_string())]);
    let backend = HttpBackend::with_token(config(&url, ApiFlavor::Gemini), Some("k2".into())).unwrap();
    assert_eq!(backend.complete(&request()).unwrap(), "hi");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].header("x-goog-api-key"), Some("k2"));
    assert_eq!(seen[0].body["contents"][0]["parts"][0]["text"], "user text");
}

#[test]
fn retries_rate_limits_then_succeeds() {
    let ok = json!({"choices": [{"message": {"content": "done"}}]}).to_string();
    let (url, seen) = serve(vec![(429, "{}".into()), (503, "{}".into()), (200, ok)]);
    let backend = HttpBackend::with_token(config(&url, ApiFlavor::Openai), None).unwrap();
    assert_eq!(backend.complete(&request()).unwrap(), "done");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, "{\"error\": \"bad key\"}".into())]);
    let backend = HttpBackend::with_token(config(&url, ApiFlavor::Openai), None).unwrap();
    let err = backend.complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 401, .. }), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn token_comes_from_the_environment() {
    let var = "TRANSOLVE_HTTP_TEST_TOKEN";
    std::env::set_var(var, "from-env");
    let (url, seen) = serve(vec![(200, json!({"choices": [{"message": {"content": "x"}}]}).to_string())]);
    let backend = HttpBackend::new(BackendConfig { auth_env: Some(var.into()), ..config(&url, ApiFlavor::Openai) })
        .unwrap();
    backend.complete(&request()).unwrap();
    assert_eq!(seen.lock().unwrap()[0].header("authorization"), Some("Bearer from-env"));
    let meta = serde_json::to_string(&backend.metadata()).unwrap();
    assert!(!meta.contains("from-env"));
}

#[test]
fn exhausted_retries_become_backend_error_records() {
    let ds = generate_dataset(1, &{
        let mut c = DatasetCounts::zeros();
        c.set(transolve::domains::DomainId::Structural, 1);
        c
    })
    .unwrap();
    let (url, _) = serve(vec![(500, "{}".into()), (500, "{}".into()), (500, "{}".into())]);
    let backend = HttpBackend::with_token(config(&url, ApiFlavor::Openai), None).unwrap();
    let run = run_assisted(&ds, &backend, &SolverConfig::default(), &RunOptions::default()).unwrap();
    assert_eq!(run.records[0].solve_status, Some(RecordStatus::BackendError));
    assert!(run.exchanges[0].error.as_deref().unwrap().contains("500"));
}
