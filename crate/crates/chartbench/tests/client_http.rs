//! The model client against a real HTTP server on a local socket.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chartbench::client::{run_batch, BatchSummary, Client, EndpointConfig, PredictionStore, RequestShape, RetryPolicy, UreqTransport};
use chartbench::io::FailureKind;
use chartbench_core::generate::{generate_manifest, GenConfig, Manifest};
use chartbench_core::prompt::PromptVariant;
use chartbench_core::{BenchmarkItem, Part};

const TABLE: &str = "TITLE | Sales <0x0A> Year | Alpha <0x0A> 2018 | 7,000";

/// Serves `status_for(request_number)` with a canned chat completion body
/// on success. Returns the base URL and the request counter.
fn serve(status_for: impl Fn(usize) -> u16 + Send + 'static) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let count = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&count);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            let mut line = String::new();
            loop {
                line.clear();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((name, value)) = line.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let n = seen.fetch_add(1, Ordering::SeqCst);
            let status = status_for(n);
            let payload = if status == 200 {
                serde_json::json!({"choices": [{"message": {"role": "assistant", "content": TABLE}}]}).to_string()
            } else {
                r#"{"error": "nope"}"#.to_string()
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    (url, count)
}

fn client(url: &str) -> Client {
    let config = EndpointConfig {
        name: "local".into(),
        base_url: url.into(),
        auth_env: None,
        model_id: "local-model".into(),
        request_shape: RequestShape::OpenaiChat,
        temperature: 0.0,
        max_output_tokens: 256,
        rate_limit: None,
        retry: RetryPolicy {
            max_attempts: 3,
            backoff_ms: vec![0],
        },
        timeout_secs: 10,
        concurrency: 1,
    };
    Client::new(config, Box::new(UreqTransport::new(Duration::from_secs(10))), None).with_sleep(|_| {})
}

/// Ten items with placeholder images written under `dir`.
fn items(dir: &Path) -> Manifest {
    let mut m = generate_manifest(&GenConfig {
        parts: vec![Part::A],
        digit_lengths: vec![2],
        entity_counts: vec![1, 2, 3, 4],
        tables_per_entity_count: 1,
        ..GenConfig::default()
    })
    .unwrap();
    m.items.truncate(10);
    for item in &mut m.items {
        let name = format!("{}.png", item.id);
        std::fs::write(dir.join(&name), item.id.as_bytes()).unwrap();
        item.image_ref = Some(name);
    }
    m
}

#[test]
fn canned_table_becomes_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let m = items(dir.path());
    let (url, count) = serve(|_| 200);
    let record = client(&url).query_item(&m.items[0], PromptVariant::Plain, b"png");
    assert!(record.succeeded(), "{:?}", record.error_message);
    assert_eq!(record.raw_text, TABLE);
    assert_eq!(record.attempts, 1);
    assert_eq!(count.load(Ordering::SeqCst), 1);
}

#[test]
fn repeated_429_exhausts_retries() {
    let dir = tempfile::tempdir().unwrap();
    let m = items(dir.path());
    let (url, count) = serve(|_| 429);
    let record = client(&url).query_item(&m.items[0], PromptVariant::Plain, b"png");
    assert_eq!(record.error, Some(FailureKind::Quota));
    assert_eq!(record.attempts, 3);
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn batch_is_resumable_and_counts_failures() {
    let dir = tempfile::tempdir().unwrap();
    let m = items(dir.path());
    let selected: Vec<&BenchmarkItem> = m.items.iter().collect();

    let (url, _) = serve(|_| 200);
    let c = client(&url);
    let store = PredictionStore::open(&dir.path().join("ok.jsonl")).unwrap();
    let first = run_batch(&c, &selected, PromptVariant::Plain, dir.path(), &store).unwrap();
    assert_eq!(first, BatchSummary { succeeded: 10, failed: 0, skipped: 0 });
    let again = run_batch(&c, &selected, PromptVariant::Plain, dir.path(), &store).unwrap();
    assert_eq!(again, BatchSummary { succeeded: 0, failed: 0, skipped: 10 });
    // Reopening reads completion state back from disk.
    drop(store);
    let reopened = PredictionStore::open(&dir.path().join("ok.jsonl")).unwrap();
    assert_eq!(reopened.completed(), 10);

    // The first three requests get a non-retryable 400.
    let (url, _) = serve(|n| if n < 3 { 400 } else { 200 });
    let c = client(&url);
    let store = PredictionStore::open(&dir.path().join("mixed.jsonl")).unwrap();
    let mixed = run_batch(&c, &selected, PromptVariant::Plain, dir.path(), &store).unwrap();
    assert_eq!(mixed, BatchSummary { succeeded: 7, failed: 3, skipped: 0 });
    // Failed items are retried on the next run; finished ones are skipped.
    let retry = run_batch(&c, &selected, PromptVariant::Plain, dir.path(), &store).unwrap();
    assert_eq!(retry, BatchSummary { succeeded: 3, failed: 0, skipped: 7 });
}

#[test]
fn corrupt_store_is_rejected_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"item_id\": 1}\n").unwrap();
    let err = PredictionStore::open(&path).err().expect("corrupt store opened");
    assert!(format!("{err:#}").contains(":1:"), "{err:#}");
}
