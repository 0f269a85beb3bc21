//! Shared fixtures: a small on-disk corpus with local images and a scripted
//! VLM that answers each strategy prompt with a canned model reply.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use unite_core::gateway::{GatewayPolicy, ProviderKind};
use unite_core::model::StrategyKind;
use unite_core::pipeline::PipelineConfig;
use unite_core::translate::render_prompt;
use unite_testkit::{MockServer, Request, Response};

pub fn png(rgb: [u8; 3]) -> Vec<u8> {
    let img = image::RgbImage::from_fn(4, 3, |x, y| {
        image::Rgb([rgb[0].wrapping_add(x as u8 * 9), rgb[1].wrapping_add(y as u8 * 7), rgb[2]])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn reply_fixture(strategy: StrategyKind, variant: usize) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("testdata/replies")
        .join(format!("{}_{}.txt", strategy.slug(), variant));
    std::fs::read_to_string(path).unwrap()
}

/// (id, title, 2-way, 3-way, 6-way)
pub const ROWS: [(&str, &str, u8, u8, u8); 3] = [
    ("a1", "Ambassador speaks at the UN", 1, 0, 0),
    ("b2", "Iguana eats a flower", 0, 2, 4),
    ("c3", "Dog sits for a portrait", 0, 1, 2),
];

pub fn image_for(i: usize) -> Vec<u8> {
    png([40 * i as u8 + 10, 100, 200 - 30 * i as u8])
}

/// Writes the corpus and its images under `dir` and returns the corpus path.
pub fn write_corpus(dir: &Path) -> PathBuf {
    let mut tsv = String::from("id\tclean_title\timage_url\t2_way_label\t3_way_label\t6_way_label\n");
    for (i, (id, title, l2, l3, l6)) in ROWS.iter().enumerate() {
        let img = dir.join(format!("{id}.png"));
        std::fs::write(&img, image_for(i)).unwrap();
        tsv.push_str(&format!("{id}\t{title}\t{}\t{l2}\t{l3}\t{l6}\n", img.display()));
    }
    let path = dir.join("corpus.tsv");
    std::fs::write(&path, tsv).unwrap();
    path
}

fn body_json(req: &Request) -> serde_json::Value {
    serde_json::from_slice(&req.body).unwrap()
}

pub fn ok_reply(text: &str) -> Response {
    Response::json(200, serde_json::json!({ "text": text, "finish_reason": "stop" }).to_string())
}

/// Scripted VLM. Each strategy prompt gets a canned reply chosen by
/// the image; `broken` lists (image bytes, strategy) pairs that get a reply
/// no parser accepts. Zero-shot prompts are answered by `zeroshot`.
pub fn vlm_server(
    broken: Vec<(Vec<u8>, StrategyKind)>,
    zeroshot: fn(&str) -> String,
) -> MockServer {
    let broken: Vec<(String, StrategyKind)> =
        broken.into_iter().map(|(b, k)| (B64.encode(b), k)).collect();
    MockServer::start(move |req| {
        let body = body_json(req);
        let prompt = body["prompt"].as_str().unwrap_or_default();
        let image = body["image_base64"].as_str().unwrap_or_default().to_string();
        if prompt.starts_with("Analyze this image and its title") {
            return ok_reply(&zeroshot(prompt));
        }
        let Some(k) = StrategyKind::ALL.into_iter().find(|&k| render_prompt(k).body == prompt) else {
            return Response::json(400, r#"{"error":"unknown prompt"}"#);
        };
        if broken.iter().any(|(b, s)| *b == image && *s == k) {
            return ok_reply("{\"primary_subject\": {\"description\": ");
        }
        let variant = 1 + image.len() % 2;
        ok_reply(&reply_fixture(k, variant))
    })
}

pub fn config(dir: &Path, corpus: &Path, server: &MockServer) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.output_dir = dir.join("out");
    cfg.corpus.path = Some(corpus.to_path_buf());
    cfg.gateway.provider = Some(ProviderKind::Generic);
    cfg.gateway.api_base = Some(server.url());
    cfg.gateway.model_id = "mock-vlm".into();
    cfg.gateway.policy = GatewayPolicy {
        requests_per_minute: 10_000,
        ..GatewayPolicy::default()
    };
    cfg.validate().unwrap();
    cfg
}

pub mod golden;
