//! Request and response shapes for each supported chat API.

use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{FinishReason, VlmRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Gemini,
    Openai,
    /// Flat JSON shape used by the mock server and simple proxies.
    Generic,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gemini" | "google" => Ok(ProviderKind::Gemini),
            "openai" => Ok(ProviderKind::Openai),
            "generic" | "mock" => Ok(ProviderKind::Generic),
            other => Err(format!("unknown provider {other:?} (expected gemini, openai or generic)")),
        }
    }
}

impl ProviderKind {
    pub fn default_base(self) -> &'static str {
        match self {
            ProviderKind::Gemini => "https://generativelanguage.googleapis.com",
            ProviderKind::Openai => "https://api.openai.com/v1",
            ProviderKind::Generic => "http://127.0.0.1:8080",
        }
    }
}

/// A fully serialized call. Retries resend exactly these bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpCall {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

pub fn build_call(kind: ProviderKind, base: &str, api_key: Option<&str>, req: &VlmRequest) -> HttpCall {
    let base = base.trim_end_matches('/');
    let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
    let image = req.image.as_ref().map(|i| (i.media_type.as_str(), B64.encode(&i.bytes)));
    let (url, body) = match kind {
        ProviderKind::Gemini => {
            if let Some(k) = api_key {
                headers.push(("x-goog-api-key".into(), k.into()));
            }
            let mut parts = vec![json!({ "text": req.prompt_text })];
            if let Some((mime, data)) = &image {
                parts.push(json!({ "inline_data": { "mime_type": mime, "data": data } }));
            }
            (
                format!("{base}/v1beta/models/{}:generateContent", req.model_id),
                json!({
                    "contents": [{ "role": "user", "parts": parts }],
                    "generationConfig": {
                        "maxOutputTokens": req.max_output_tokens,
                        "temperature": req.temperature,
                    },
                }),
            )
        }
        ProviderKind::Openai => {
            if let Some(k) = api_key {
                headers.push(("Authorization".into(), format!("Bearer {k}")));
            }
            let mut content = vec![json!({ "type": "text", "text": req.prompt_text })];
            if let Some((mime, data)) = &image {
                content.push(json!({
                    "type": "image_url",
                    "image_url": { "url": format!("data:{mime};base64,{data}") },
                }));
            }
            (
                format!("{base}/chat/completions"),
                json!({
                    "model": req.model_id,
                    "messages": [{ "role": "user", "content": content }],
                    "max_tokens": req.max_output_tokens,
                    "temperature": req.temperature,
                }),
            )
        }
        ProviderKind::Generic => {
            if let Some(k) = api_key {
                headers.push(("Authorization".into(), format!("Bearer {k}")));
            }
            (
                format!("{base}/complete"),
                json!({
                    "model": req.model_id,
                    "prompt": req.prompt_text,
                    "image_base64": image.as_ref().map(|(_, d)| d.as_str()),
                    "media_type": image.as_ref().map(|(m, _)| *m),
                    "max_tokens": req.max_output_tokens,
                    "temperature": req.temperature,
                }),
            )
        }
    };
    HttpCall {
        url,
        headers,
        body: serde_json::to_vec(&body).expect("request body serializes"),
    }
}

/// Outcome of decoding a 2xx (or content-filter) body.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub text: String,
    pub finish_reason: FinishReason,
}

fn map_finish(kind: ProviderKind, raw: Option<&str>) -> FinishReason {
    let raw = raw.unwrap_or("stop").to_ascii_lowercase();
    match (kind, raw.as_str()) {
        (_, "stop") | (_, "end_turn") => FinishReason::Stop,
        (_, "length") | (_, "max_tokens") => FinishReason::Length,
        (_, "content_filter") | (_, "filtered") | (_, "safety") | (_, "recitation")
        | (_, "blocklist") | (_, "prohibited_content") | (_, "spii") => FinishReason::Filtered,
        (ProviderKind::Gemini, "finish_reason_unspecified") => FinishReason::Stop,
        _ => FinishReason::Error,
    }
}

/// Decodes a successful response body. Returns `Err` with a description if
/// the body does not have the expected shape.
pub fn decode_success(kind: ProviderKind, body: &str) -> Result<Decoded, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    let (text, finish) = match kind {
        ProviderKind::Gemini => {
            if v.pointer("/promptFeedback/blockReason").is_some() {
                return Ok(Decoded {
                    text: String::new(),
                    finish_reason: FinishReason::Filtered,
                });
            }
            let cand = v
                .pointer("/candidates/0")
                .ok_or_else(|| "response has no candidates".to_string())?;
            let text = cand
                .pointer("/content/parts")
                .and_then(Value::as_array)
                .map(|parts| {
                    parts
                        .iter()
                        .filter_map(|p| p.get("text").and_then(Value::as_str))
                        .collect::<String>()
                })
                .unwrap_or_default();
            (text, map_finish(kind, cand.get("finishReason").and_then(Value::as_str)))
        }
        ProviderKind::Openai => {
            let choice = v
                .pointer("/choices/0")
                .ok_or_else(|| "response has no choices".to_string())?;
            let text = choice
                .pointer("/message/content")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            (text, map_finish(kind, choice.get("finish_reason").and_then(Value::as_str)))
        }
        ProviderKind::Generic => {
            let text = v
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| "response has no text field".to_string())?
                .to_string();
            (text, map_finish(kind, v.get("finish_reason").and_then(Value::as_str)))
        }
    };
    if text.is_empty() && !matches!(finish, FinishReason::Filtered | FinishReason::Error) {
        return Err("empty response text".into());
    }
    Ok(Decoded {
        text,
        finish_reason: finish,
    })
}

/// Whether an error body reports a content-policy refusal.
pub fn is_content_filter_error(body: &str) -> bool {
    let lower = body.to_ascii_lowercase();
    lower.contains("content_filter") || lower.contains("content_policy") || lower.contains("safety")
}
