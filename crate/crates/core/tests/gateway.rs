use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use unite_core::gateway::{
    cache_key, zeroshot_classify, FinishReason, Gateway, GatewayError, GatewayPolicy,
    ProviderConfig, ProviderKind, VlmRequest,
};
use unite_core::model::{Label2, Label3, Label6, Sample};
use unite_testkit::{MockServer, Response};

fn fast_policy() -> GatewayPolicy {
    GatewayPolicy {
        max_retries: 3,
        backoff_initial: Duration::from_millis(5),
        backoff_multiplier: 2.0,
        backoff_cap: Duration::from_millis(20),
        requests_per_minute: 1000,
        ..GatewayPolicy::default()
    }
}

fn gateway(server: &MockServer, policy: GatewayPolicy) -> Gateway {
    let provider = ProviderConfig::new(ProviderKind::Generic, server.url(), Some("secret".into()));
    Gateway::new(provider, policy).unwrap()
}

fn request(prompt: &str) -> VlmRequest {
    VlmRequest {
        model_id: "mock-vlm".into(),
        prompt_version: "v1".into(),
        prompt_text: prompt.into(),
        image: None,
        max_output_tokens: 50,
        temperature: 0.0,
    }
}

fn ok(text: &str) -> Response {
    Response::json(200, serde_json::json!({ "text": text, "finish_reason": "stop" }).to_string())
}

#[test]
fn two_rate_limits_then_success() {
    let n = Arc::new(AtomicUsize::new(0));
    let counter = n.clone();
    let server = MockServer::start(move |_| match counter.fetch_add(1, Ordering::SeqCst) {
        0 | 1 => Response::json(429, "{}"),
        _ => ok(" verbatim text\n"),
    });
    let gw = gateway(&server, fast_policy());
    let resp = gw.complete(&request("hello")).unwrap();
    assert_eq!(server.request_count(), 3);
    assert_eq!(resp.attempts, 3);
    assert_eq!(resp.text, " verbatim text\n");
    assert_eq!(resp.finish_reason, FinishReason::Stop);

    let reqs = server.requests();
    assert!(reqs.windows(2).all(|w| w[0].body == w[1].body && w[0].path == w[1].path));
    assert_eq!(reqs[0].header("authorization"), Some("Bearer secret"));
}

#[test]
fn auth_failure_is_not_retried() {
    let server = MockServer::start(|_| Response::json(401, r#"{"error":"bad key"}"#));
    let gw = gateway(&server, fast_policy());
    let err = gw.complete(&request("hello")).unwrap_err();
    assert!(matches!(err, GatewayError::Auth { status: 401, .. }), "{err}");
    assert_eq!(server.request_count(), 1);
}

#[test]
fn server_errors_exhaust_retries() {
    let server = MockServer::start(|_| Response::text(503, "busy"));
    let gw = gateway(&server, fast_policy());
    let err = gw.complete(&request("hello")).unwrap_err();
    assert!(matches!(err, GatewayError::RetriesExhausted { attempts: 4, .. }), "{err}");
    assert_eq!(server.request_count(), 4);
}

#[test]
fn content_filter_is_not_retried() {
    let server = MockServer::start(|_| {
        Response::json(200, r#"{"text":"","finish_reason":"content_filter"}"#)
    });
    let gw = gateway(&server, fast_policy());
    let resp = gw.complete(&request("hello")).unwrap();
    assert_eq!(resp.finish_reason, FinishReason::Filtered);
    assert_eq!(server.request_count(), 1);
}

#[test]
fn cache_hit_makes_no_network_calls() {
    let dir = tempfile::tempdir().unwrap();
    let server = MockServer::start(|_| ok("cached answer"));
    let policy = GatewayPolicy {
        cache_dir: Some(dir.path().to_path_buf()),
        ..fast_policy()
    };
    let first = gateway(&server, policy.clone()).complete(&request("p")).unwrap();
    assert!(!first.from_cache);
    assert_eq!(server.request_count(), 1);

    // A fresh gateway on the same directory still hits.
    let gw = gateway(&server, policy);
    let second = gw.complete(&request("p")).unwrap();
    assert!(second.from_cache);
    assert_eq!(second.text, "cached answer");
    assert_eq!(server.request_count(), 1);
    assert_eq!(gw.network_calls(), 0);
    assert!(dir.path().join(format!("{}.json", cache_key(&request("p")))).exists());
    assert!(dir.path().join("index.jsonl").exists());
}

#[test]
fn rate_window_holds_on_server_timestamps() {
    let server = MockServer::start(|_| ok("x"));
    let window = Duration::from_millis(400);
    let policy = GatewayPolicy {
        requests_per_minute: 3,
        rate_window: window,
        ..fast_policy()
    };
    let gw = Arc::new(gateway(&server, policy));
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let gw = gw.clone();
            std::thread::spawn(move || {
                for i in 0..2 {
                    gw.complete(&request(&format!("t{t} r{i}"))).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let mut stamps: Vec<_> = server.requests().iter().map(|r| r.received_at).collect();
    stamps.sort();
    assert_eq!(stamps.len(), 8);
    // Server receipt lags admission by a variable amount; allow a small
    // slack below the window when comparing receipt times.
    let slack = Duration::from_millis(40);
    for i in 0..stamps.len() - 3 {
        let span = stamps[i + 3].duration_since(stamps[i]);
        assert!(span + slack >= window, "4 requests within {span:?}");
    }
}

#[test]
fn zeroshot_against_mock() {
    let server = MockServer::start(|req| {
        let body: serde_json::Value = serde_json::from_slice(&req.body).unwrap();
        let prompt = body["prompt"].as_str().unwrap();
        assert_eq!(body["max_tokens"], 100);
        if prompt.contains("moon") {
            ok("REAL. The photo is consistent.")
        } else {
            ok("Hard to say.")
        }
    });
    let gw = gateway(&server, fast_policy());
    let sample = |title: &str| Sample {
        id: "1".into(),
        title: title.into(),
        image_ref: String::new(),
        label6: Label6::True,
        label3: Label3::True,
        label2: Label2::Real,
    };
    let out = zeroshot_classify(&gw, &sample("Photo of the moon"), None, "m", 0.0).unwrap();
    assert_eq!(out.prediction, Label2::Real);
    assert_eq!(out.raw, "REAL. The photo is consistent.");
    let out = zeroshot_classify(&gw, &sample("Cat"), None, "m", 0.0).unwrap();
    assert_eq!(out.prediction, Label2::Fake);
}
