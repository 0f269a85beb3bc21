//! Image and text feature vectors, and the seeded linear maps that project
//! both into a shared space.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net;

/// Norms at or below this are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

pub const REFERENCE_TEXT_DIM: usize = 256;
pub const REFERENCE_IMAGE_DIM: usize = 3 * HIST_BINS + 4;
const HIST_BINS: usize = 64;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature vector is empty")]
    Empty,
    #[error("non-finite feature value at index {0}")]
    NonFinite(usize),
    #[error("{provider}: expected {expected} {source_kind} dims, got {got}")]
    DimMismatch {
        provider: String,
        source_kind: FeatureSource,
        expected: usize,
        got: usize,
    },
    #[error("projection expects input dim {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("projection dims must be >= 1 (got {0} and {1})")]
    ZeroDim(usize, usize),
    #[error("degenerate projection: norm {0:e} <= 1e-12")]
    Degenerate(f64),
    #[error("cannot decode image: {0}")]
    Image(String),
    #[error("feature provider transport: {0}")]
    Transport(String),
    #[error("feature provider response: {0}")]
    Response(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Image,
    Text,
}

impl std::fmt::Display for FeatureSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureSource::Image => "image",
            FeatureSource::Text => "text",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    source: FeatureSource,
    provider_id: String,
}

impl FeatureVector {
    pub fn new(
        values: Vec<f64>,
        source: FeatureSource,
        provider_id: impl Into<String>,
    ) -> Result<Self, FeatureError> {
        if values.is_empty() {
            return Err(FeatureError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self {
            values,
            source,
            provider_id: provider_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }
}

pub enum FeatureInput<'a> {
    Image(&'a [u8]),
    Text(&'a str),
}

pub trait FeatureProvider: Send + Sync {
    fn id(&self) -> &str;
    fn image_dim(&self) -> usize;
    fn text_dim(&self) -> usize;
    fn embed_image(&self, bytes: &[u8]) -> Result<FeatureVector, FeatureError>;
    fn embed_text(&self, text: &str) -> Result<FeatureVector, FeatureError>;
}

/// Embeds one input and checks the result against the provider's declared dim.
pub fn embed(
    provider: &dyn FeatureProvider,
    input: FeatureInput<'_>,
) -> Result<FeatureVector, FeatureError> {
    let (v, expected) = match input {
        FeatureInput::Image(b) => (provider.embed_image(b)?, provider.image_dim()),
        FeatureInput::Text(t) => (provider.embed_text(t)?, provider.text_dim()),
    };
    if v.dim() != expected {
        return Err(FeatureError::DimMismatch {
            provider: provider.id().to_string(),
            source_kind: v.source(),
            expected,
            got: v.dim(),
        });
    }
    Ok(v)
}

/// Offline featurizers: hashed token counts for text, colour histograms and
/// size statistics for images. Pure functions of their input.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceProvider;

const REFERENCE_ID: &str = "reference-v1";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl FeatureProvider for ReferenceProvider {
    fn id(&self) -> &str {
        REFERENCE_ID
    }

    fn image_dim(&self) -> usize {
        REFERENCE_IMAGE_DIM
    }

    fn text_dim(&self) -> usize {
        REFERENCE_TEXT_DIM
    }

    fn embed_text(&self, text: &str) -> Result<FeatureVector, FeatureError> {
        let mut values = vec![0.0; REFERENCE_TEXT_DIM];
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let idx = fnv1a(token.to_lowercase().as_bytes()) % REFERENCE_TEXT_DIM as u64;
            values[idx as usize] += 1.0;
        }
        FeatureVector::new(values, FeatureSource::Text, REFERENCE_ID)
    }

    fn embed_image(&self, bytes: &[u8]) -> Result<FeatureVector, FeatureError> {
        let img = image::load_from_memory(bytes)
            .map_err(|e| FeatureError::Image(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        let mut values = vec![0.0; REFERENCE_IMAGE_DIM];
        let mut luminance = 0.0;
        for px in img.pixels() {
            let [r, g, b] = px.0;
            for (channel, v) in [r, g, b].into_iter().enumerate() {
                values[channel * HIST_BINS + usize::from(v) * HIST_BINS / 256] += 1.0;
            }
            luminance += 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
        }
        let n = f64::from(w) * f64::from(h);
        if n > 0.0 {
            values[..3 * HIST_BINS].iter_mut().for_each(|v| *v /= n);
            luminance /= n * 255.0;
        }
        let stats = &mut values[3 * HIST_BINS..];
        stats[0] = f64::from(w).ln_1p();
        stats[1] = f64::from(h).ln_1p();
        stats[2] = if h == 0 { 0.0 } else { f64::from(w) / f64::from(h) };
        stats[3] = luminance;
        FeatureVector::new(values, FeatureSource::Image, REFERENCE_ID)
    }
}

#[derive(Debug, Deserialize)]
struct Handshake {
    #[serde(default)]
    id: Option<String>,
    image_dim: usize,
    text_dim: usize,
}

/// Remote featurizer. `GET {base}/dims` returns
/// `{"image_dim": n, "text_dim": m}`; `POST {base}/embed/image` (raw bytes)
/// and `POST {base}/embed/text` (UTF-8 body) return a JSON array of reals.
pub struct HttpProvider {
    base: String,
    id: String,
    image_dim: usize,
    text_dim: usize,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn connect(base: &str, timeout: Duration) -> Result<Self, FeatureError> {
        let base = base.trim_end_matches('/').to_string();
        let agent = net::agent(timeout);
        let body = read_ok(agent.get(format!("{base}/dims")).call())?;
        let hs: Handshake = serde_json::from_str(&body)
            .map_err(|e| FeatureError::Response(format!("handshake: {e}")))?;
        if hs.image_dim == 0 || hs.text_dim == 0 {
            return Err(FeatureError::Response("handshake declares a zero dim".into()));
        }
        Ok(Self {
            id: hs.id.unwrap_or_else(|| format!("http:{base}")),
            base,
            image_dim: hs.image_dim,
            text_dim: hs.text_dim,
            agent,
        })
    }

    fn parse_vector(&self, body: &str, source: FeatureSource) -> Result<FeatureVector, FeatureError> {
        let values: Vec<f64> =
            serde_json::from_str(body).map_err(|e| FeatureError::Response(e.to_string()))?;
        FeatureVector::new(values, source, self.id.clone())
    }
}

fn read_ok(
    result: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
) -> Result<String, FeatureError> {
    let mut resp = result.map_err(|e| FeatureError::Transport(e.to_string()))?;
    let status = resp.status();
    let body = resp
        .body_mut()
        .with_config()
        .limit(net::MAX_BODY_BYTES)
        .read_to_string()
        .map_err(|e| FeatureError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(FeatureError::Response(format!("HTTP {status}: {body}")));
    }
    Ok(body)
}

impl FeatureProvider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn image_dim(&self) -> usize {
        self.image_dim
    }

    fn text_dim(&self) -> usize {
        self.text_dim
    }

    fn embed_image(&self, bytes: &[u8]) -> Result<FeatureVector, FeatureError> {
        let body = read_ok(
            self.agent
                .post(format!("{}/embed/image", self.base))
                .header("Content-Type", "application/octet-stream")
                .send(bytes),
        )?;
        self.parse_vector(&body, FeatureSource::Image)
    }

    fn embed_text(&self, text: &str) -> Result<FeatureVector, FeatureError> {
        let body = read_ok(
            self.agent
                .post(format!("{}/embed/text", self.base))
                .header("Content-Type", "text/plain; charset=utf-8")
                .send(text),
        )?;
        self.parse_vector(&body, FeatureSource::Text)
    }
}

/// Row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = xavier_bound(cols, rows);
        let data = (0..rows * cols)
            .map(|_| loop {
                // Draws are half-open; reject the closed end to keep the
                // interval open on both sides.
                let x = rng.random_range(-bound..bound);
                if x != -bound {
                    break x;
                }
            })
            .collect();
        Self { rows, cols, data }
    }
}

/// Half-width of the Xavier-uniform interval.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub w_i: Matrix,
    pub w_t: Matrix,
    pub d: usize,
    pub seed: u64,
}

/// Both maps come from one seeded stream, image matrix first.
pub fn make_projections(dim_i: usize, dim_t: usize, seed: u64) -> Result<ProjectionPair, FeatureError> {
    if dim_i == 0 || dim_t == 0 {
        return Err(FeatureError::ZeroDim(dim_i, dim_t));
    }
    let d = dim_i.min(dim_t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_i = Matrix::xavier(d, dim_i, &mut rng);
    let w_t = Matrix::xavier(d, dim_t, &mut rng);
    Ok(ProjectionPair { w_i, w_t, d, seed })
}

impl ProjectionPair {
    pub fn matrix_for(&self, source: FeatureSource) -> &Matrix {
        match source {
            FeatureSource::Image => &self.w_i,
            FeatureSource::Text => &self.w_t,
        }
    }

    /// Raw (unnormalized) projection of a feature vector.
    pub fn project(&self, v: &FeatureVector) -> Result<Vec<f64>, FeatureError> {
        project(v.values(), self.matrix_for(v.source()))
    }
}

pub fn project(v: &[f64], w: &Matrix) -> Result<Vec<f64>, FeatureError> {
    if v.len() != w.cols {
        return Err(FeatureError::ShapeMismatch {
            expected: w.cols,
            got: v.len(),
        });
    }
    Ok(w.data
        .chunks_exact(w.cols)
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect())
}

pub fn normalize(p: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= NORM_EPS {
        return Err(FeatureError::Degenerate(n));
    }
    Ok(p.iter().map(|x| x / n).collect())
}

pub fn project_and_normalize(v: &[f64], w: &Matrix) -> Result<Vec<f64>, FeatureError> {
    normalize(&project(v, w)?)
}
