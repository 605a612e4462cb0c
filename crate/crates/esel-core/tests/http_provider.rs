//! Wire-protocol tests for the HTTP provider against a scripted local server.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::time::Duration;

use esel_core::provider::{CompletionRequest, HttpProvider, Provider, ScoreRequest};

/// Serve `responses` (status line body pairs) one connection at a time, then
/// stop. Returns the base URL.
fn scripted_server(responses: Vec<(u16, String)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for (status, body) in responses {
            let (mut stream, _) = match listener.accept() {
                Ok(conn) => conn,
                Err(_) => return,
            };
            // Read the request: headers, then exactly Content-Length bytes.
            let mut buf = Vec::new();
            let mut chunk = [0u8; 1024];
            let (mut header_end, mut content_length) = (None, 0usize);
            loop {
                match stream.read(&mut chunk) {
                    Ok(0) => break,
                    Ok(n) => {
                        buf.extend_from_slice(&chunk[..n]);
                        if header_end.is_none() {
                            if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                                header_end = Some(pos + 4);
                                let headers = String::from_utf8_lossy(&buf[..pos]);
                                for line in headers.lines() {
                                    if let Some(v) =
                                        line.to_ascii_lowercase().strip_prefix("content-length:")
                                    {
                                        content_length = v.trim().parse().unwrap_or(0);
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
                    Err(_) => break,
                }
            }
            let reason = match status {
                200 => "OK",
                500 => "Internal Server Error",
                400 => "Bad Request",
                _ => "Unknown",
            };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    format!("http://{addr}")
}

fn provider_for(base: String) -> HttpProvider {
    HttpProvider::new(base, Some("test-token".into()))
        .unwrap()
        .with_backoff(Duration::from_millis(5))
}

#[test]
fn complete_round_trips_json() {
    let base = scripted_server(vec![(200, r#"{"text":"Denver"}"#.to_string())]);
    let provider = provider_for(base);
    let out = provider
        .complete(&CompletionRequest::greedy("P", 16, vec!["\n\n".into()]))
        .unwrap();
    assert_eq!(out, "Denver");
    assert_eq!(provider.retry_count(), 0);
}

#[test]
fn score_round_trips_json() {
    let base = scripted_server(vec![(200, r#"{"avg_logprob":-0.25}"#.to_string())]);
    let provider = provider_for(base);
    let score = provider
        .score(&ScoreRequest {
            prompt: "P".into(),
            completion: "great".into(),
        })
        .unwrap();
    assert!((score + 0.25).abs() < 1e-12);
}

#[test]
fn server_errors_are_retried_until_success() {
    let base = scripted_server(vec![
        (500, r#"{"error":"overloaded"}"#.to_string()),
        (500, r#"{"error":"overloaded"}"#.to_string()),
        (200, r#"{"text":"42"}"#.to_string()),
    ]);
    let provider = provider_for(base);
    let out = provider
        .complete(&CompletionRequest::greedy("P", 16, vec![]))
        .unwrap();
    assert_eq!(out, "42");
    assert_eq!(provider.retry_count(), 2);
}

#[test]
fn retries_are_bounded() {
    let base = scripted_server(vec![
        (500, r#"{"error":"down"}"#.to_string()),
        (500, r#"{"error":"down"}"#.to_string()),
        (500, r#"{"error":"down"}"#.to_string()),
    ]);
    let provider = provider_for(base);
    let err = provider
        .complete(&CompletionRequest::greedy("P", 16, vec![]))
        .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("gave up after 3 attempts"), "{msg}");
    assert!(msg.contains("down"), "{msg}");
}

#[test]
fn client_errors_fail_fast() {
    let base = scripted_server(vec![(400, r#"{"error":"bad prompt"}"#.to_string())]);
    let provider = provider_for(base);
    let err = provider
        .complete(&CompletionRequest::greedy("P", 16, vec![]))
        .unwrap_err();
    assert!(err.to_string().contains("bad prompt"));
    assert_eq!(provider.retry_count(), 0);
}

#[test]
fn non_conforming_response_is_an_error() {
    let base = scripted_server(vec![(200, r#"{"unexpected":true}"#.to_string())]);
    let provider = provider_for(base);
    let err = provider
        .complete(&CompletionRequest::greedy("P", 16, vec![]))
        .unwrap_err();
    assert!(err.to_string().contains("non-conforming response"));
}
