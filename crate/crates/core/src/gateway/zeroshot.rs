//! Zero-shot fake/real classification with a vision-language model.

use super::{Gateway, GatewayError, ImagePayload, VlmRequest};
use crate::model::{Label2, Sample};

pub const ZEROSHOT_TEMPLATE: &str = "Analyze this image and its title: \"{title}\"\n\nIs this a fake news post or a real news post? \nRespond with either FAKE or REAL, followed by your explanation.\n\nTitle: {title}";

pub const ZEROSHOT_PROMPT_VERSION: &str = "zeroshot-v1";
pub const ZEROSHOT_MAX_TOKENS: u32 = 100;

pub fn render_zeroshot_prompt(title: &str) -> String {
    ZEROSHOT_TEMPLATE.replace("{title}", title)
}

/// First whitespace-delimited token, punctuation stripped, case-folded.
/// Only "real" maps to Real; everything else, including an empty reply,
/// falls back to Fake.
pub fn parse_zeroshot(text: &str) -> Label2 {
    let first = text.split_whitespace().next().unwrap_or("");
    let word = first
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    match word.as_str() {
        "real" => Label2::Real,
        _ => Label2::Fake,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotOutcome {
    pub prediction: Label2,
    pub raw: String,
}

pub fn zeroshot_classify(
    gateway: &Gateway,
    sample: &Sample,
    image: Option<ImagePayload>,
    model_id: &str,
    temperature: f64,
) -> Result<ZeroShotOutcome, GatewayError> {
    let req = VlmRequest {
        model_id: model_id.to_string(),
        prompt_version: ZEROSHOT_PROMPT_VERSION.to_string(),
        prompt_text: render_zeroshot_prompt(&sample.title),
        image,
        max_output_tokens: ZEROSHOT_MAX_TOKENS,
        temperature,
    };
    let resp = gateway.complete(&req)?;
    Ok(ZeroShotOutcome {
        prediction: parse_zeroshot(&resp.text),
        raw: resp.text,
    })
}
