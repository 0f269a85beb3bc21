//! Pipeline stages. Each stage reads and writes files under the configured
//! output directory, so stages can run one at a time or back to back.
//!
//! Layout:
//!
//! ```text
//! samples.jsonl            ingest
//! ingest_report.json
//! sampled.jsonl            sample
//! variants/<slug>.jsonl    convert
//! convert_manifest.json
//! merged/<slug>.jsonl      merge
//! metrics/report.json      metrics
//! metrics/report.txt
//! ```

pub mod config;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use config::{FeatureProviderKind, PipelineConfig, CONFIG_ENV};

use crate::featurize::{
    embed, make_projections, normalize, FeatureError, FeatureInput, FeatureProvider, HttpProvider,
    ProjectionPair, ReferenceProvider,
};
use crate::gateway::{
    FinishReason, Gateway, GatewayError, ImagePayload, VlmRequest, zeroshot_classify,
};
use crate::ingest::{
    class_counts, load_corpus, read_samples, stratified_sample, write_samples, FetchError,
    ImageCache, IngestError, SamplingError,
};
use crate::metrics::{
    self, graph_summary, object_surrogate, MetricError, MetricReport, ReportMetadata,
    SampleMetrics, SirKind, SurrogateKind, WordNetDepthTable, WordNetError,
};
use crate::model::{
    decode_record, encode_record, ConversionRecord, DatasetLine, Label2, Label3, Label6,
    RecordStatus, Sample, StrategyKind,
};
use crate::report::{self, PredictionFile, ReportError, Task};
use crate::translate::{clean_title, content_text, merge, parse_output, render_prompt, to_description_text};
use crate::util::write_atomic;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing input {0}; run the earlier stage first")]
    MissingInput(PathBuf),
    #[error("{path}:{line}: {reason}")]
    BadLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    WordNet(#[from] WordNetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(io_err(path))
}

fn load_samples(path: &Path) -> Result<Vec<Sample>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()));
    }
    read_samples(path).map_err(io_err(path))
}

/// File locations under one output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn samples(&self) -> PathBuf {
        self.root.join("samples.jsonl")
    }
    pub fn ingest_report(&self) -> PathBuf {
        self.root.join("ingest_report.json")
    }
    pub fn sampled(&self) -> PathBuf {
        self.root.join("sampled.jsonl")
    }
    pub fn variant(&self, s: StrategyKind) -> PathBuf {
        self.root.join("variants").join(format!("{}.jsonl", s.slug()))
    }
    pub fn convert_manifest(&self) -> PathBuf {
        self.root.join("convert_manifest.json")
    }
    pub fn merged(&self, s: StrategyKind) -> PathBuf {
        self.root.join("merged").join(format!("{}.jsonl", s.slug()))
    }
    pub fn metrics_json(&self) -> PathBuf {
        self.root.join("metrics").join("report.json")
    }
    pub fn metrics_txt(&self) -> PathBuf {
        self.root.join("metrics").join("report.txt")
    }
}

impl PipelineConfig {
    pub fn layout(&self) -> Layout {
        Layout::new(&self.output_dir)
    }

    /// Config as recorded in manifests: machine-local paths are dropped so
    /// that the same run in two directories yields the same manifest.
    pub fn snapshot(&self) -> PipelineConfig {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.corpus.path = c.corpus.path.as_ref().and_then(|p| p.file_name()).map(PathBuf::from);
        c.images.cache_dir = None;
        c.gateway.policy.cache_dir = None;
        c.metrics.wordnet = c.metrics.wordnet.as_ref().and_then(|p| p.file_name()).map(PathBuf::from);
        c
    }

    pub fn image_cache(&self) -> Result<ImageCache, PipelineError> {
        let dir = self.image_cache_dir();
        ImageCache::open(&dir).map_err(PipelineError::Fetch)
    }

    pub fn gateway(&self) -> Result<Gateway, PipelineError> {
        Ok(Gateway::new(self.provider_config()?, self.gateway_policy())?)
    }

    pub fn feature_provider(&self) -> Result<Box<dyn FeatureProvider>, PipelineError> {
        Ok(match self.features.provider {
            FeatureProviderKind::Reference => Box::new(ReferenceProvider),
            FeatureProviderKind::Http => {
                let url = self.features.url.as_deref().unwrap_or_default();
                Box::new(HttpProvider::connect(url, self.gateway.policy.timeout)?)
            }
        })
    }

    pub fn depth_table(&self) -> Result<WordNetDepthTable, PipelineError> {
        Ok(match &self.metrics.wordnet {
            Some(p) => WordNetDepthTable::load(p)?,
            None => WordNetDepthTable::bundled_mini(),
        })
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))
}

/// Anything a stage reports back; drives the process exit code.
pub trait StageSummary {
    /// Rows that failed individually while the stage as a whole completed.
    fn sample_errors(&self) -> usize;
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub loaded: usize,
    pub skipped_empty_title: usize,
    pub skipped_missing_image: usize,
    pub label2_mismatches: Vec<String>,
    /// Rows dropped because their image could not be fetched, by error kind.
    pub fetch_failures: BTreeMap<String, usize>,
    pub kept: usize,
    pub class_counts: [usize; 6],
}

impl StageSummary for IngestSummary {
    fn sample_errors(&self) -> usize {
        self.fetch_failures.values().sum()
    }
}

fn fetch_error_kind(e: &FetchError) -> &'static str {
    match e {
        FetchError::Io { .. } => "io",
        FetchError::Network { .. } => "network",
        FetchError::Http { .. } => "http",
        FetchError::NotImage { .. } => "not_image",
        FetchError::Pool(_) => "pool",
    }
}

/// Loads the corpus and, unless disabled, fetches every image so that rows
/// with unusable images are gone before sampling.
pub fn run_ingest(cfg: &PipelineConfig) -> Result<IngestSummary, PipelineError> {
    let loaded = load_corpus(&cfg.corpus_source()?)?;
    let mut fetch_failures = BTreeMap::new();
    let mut kept = loaded.samples.clone();
    if cfg.images.fetch_on_ingest {
        let cache = cfg.image_cache()?;
        let refs: Vec<String> = kept.iter().map(|s| s.image_ref.clone()).collect();
        let results = cache.fetch_all(&refs, cfg.images.workers)?;
        let mut keep = Vec::with_capacity(kept.len());
        for (s, r) in kept.into_iter().zip(results) {
            match r {
                Ok(_) => keep.push(s),
                Err(e) => {
                    log::warn!("dropping {}: {e}", s.id);
                    *fetch_failures.entry(fetch_error_kind(&e).to_string()).or_insert(0) += 1;
                }
            }
        }
        kept = keep;
    }
    let layout = cfg.layout();
    write_samples(&layout.samples(), &kept).map_err(io_err(&layout.samples()))?;
    let summary = IngestSummary {
        loaded: loaded.samples.len(),
        skipped_empty_title: loaded.skipped_empty_title,
        skipped_missing_image: loaded.skipped_missing_image,
        label2_mismatches: loaded.label2_mismatches,
        fetch_failures,
        kept: kept.len(),
        class_counts: class_counts(&kept),
    };
    write_json(&layout.ingest_report(), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------- sample

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub population: usize,
    pub selected: usize,
    pub population_counts: [usize; 6],
    pub selected_counts: [usize; 6],
}

impl StageSummary for SampleSummary {
    fn sample_errors(&self) -> usize {
        0
    }
}

pub fn run_sample(cfg: &PipelineConfig) -> Result<SampleSummary, PipelineError> {
    let layout = cfg.layout();
    let population = load_samples(&layout.samples())?;
    let chosen = stratified_sample(&population, &cfg.sampling_plan(population.len()))?;
    write_samples(&layout.sampled(), &chosen).map_err(io_err(&layout.sampled()))?;
    Ok(SampleSummary {
        population: population.len(),
        selected: chosen.len(),
        population_counts: class_counts(&population),
        selected_counts: class_counts(&chosen),
    })
}

// ---------------------------------------------------------------- convert

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StatusCounts {
    pub ok: usize,
    pub parse_error: usize,
    pub api_error: usize,
}

impl StatusCounts {
    fn add(&mut self, s: RecordStatus) {
        match s {
            RecordStatus::Ok => self.ok += 1,
            RecordStatus::ParseError => self.parse_error += 1,
            RecordStatus::ApiError => self.api_error += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyManifest {
    pub prompt_version: String,
    pub counts: StatusCounts,
    /// Failure classes only; messages can carry hosts or keys.
    pub error_kinds: BTreeMap<String, usize>,
}

/// Everything needed to reproduce a conversion run. Holds no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvertManifest {
    pub model_id: String,
    pub provider_id: String,
    pub seed: u64,
    pub sample_count: usize,
    pub strategies: BTreeMap<String, StrategyManifest>,
    pub config: PipelineConfig,
}

impl ConvertManifest {
    pub fn totals(&self) -> StatusCounts {
        let mut t = StatusCounts::default();
        for m in self.strategies.values() {
            t.ok += m.counts.ok;
            t.parse_error += m.counts.parse_error;
            t.api_error += m.counts.api_error;
        }
        t
    }
}

impl StageSummary for ConvertManifest {
    fn sample_errors(&self) -> usize {
        let t = self.totals();
        t.parse_error + t.api_error
    }
}

fn load_image(cache: &ImageCache, image_ref: &str) -> Result<ImagePayload, String> {
    let fetched = cache.fetch(image_ref).map_err(|e| fetch_error_kind(&e).to_string())?;
    let bytes = fs::read(&fetched.path).map_err(|_| "io".to_string())?;
    ImagePayload::from_bytes(bytes).map_err(|_| "not_image".to_string())
}

/// One strategy's record for one sample, plus the failure class if any.
fn convert_one(
    cfg: &PipelineConfig,
    gateway: &Gateway,
    sample: &Sample,
    image: &Result<ImagePayload, String>,
    strategy: StrategyKind,
) -> (ConversionRecord, Option<String>) {
    let template = render_prompt(strategy);
    let model = cfg.gateway.model_id.as_str();
    let failed = |raw: &str, status, kind: String| {
        (
            ConversionRecord::failed(&sample.id, strategy, model, template.version, raw, status),
            Some(kind),
        )
    };
    let image = match image {
        Ok(i) => i.clone(),
        Err(kind) => return failed("", RecordStatus::ApiError, format!("image_{kind}")),
    };
    let req = VlmRequest {
        model_id: model.to_string(),
        prompt_version: template.version.to_string(),
        prompt_text: template.body.to_string(),
        image: Some(image),
        max_output_tokens: cfg.gateway.max_output_tokens,
        temperature: cfg.gateway.temperature,
    };
    match gateway.complete(&req) {
        Err(e) => failed("", RecordStatus::ApiError, e.kind().to_string()),
        Ok(resp) if resp.finish_reason == FinishReason::Filtered => {
            failed(&resp.text, RecordStatus::ApiError, "filtered".into())
        }
        Ok(resp) => match parse_output(strategy, &resp.text) {
            Ok(parsed) => (
                ConversionRecord::ok(&sample.id, model, template.version, resp.text, parsed),
                None,
            ),
            Err(_) => failed(&resp.text, RecordStatus::ParseError, "parse".into()),
        },
    }
}

/// Sends every sampled row through every configured strategy. Requests fan
/// out over the gateway worker pool; each variant file is written once, in
/// sample order, after all results are in.
pub fn run_convert(cfg: &PipelineConfig, gateway: &Gateway) -> Result<ConvertManifest, PipelineError> {
    let layout = cfg.layout();
    let samples = load_samples(&layout.sampled())?;
    let cache = cfg.image_cache()?;
    let strategies = cfg.strategies.clone();

    let rows: Vec<Vec<(ConversionRecord, Option<String>)>> = pool(cfg.gateway.workers)?.install(|| {
        samples
            .par_iter()
            .map(|s| {
                let image = load_image(&cache, &s.image_ref);
                strategies
                    .par_iter()
                    .map(|&k| convert_one(cfg, gateway, s, &image, k))
                    .collect()
            })
            .collect()
    });

    let mut manifests = BTreeMap::new();
    for (i, &strategy) in strategies.iter().enumerate() {
        let mut out = String::new();
        let mut m = StrategyManifest {
            prompt_version: render_prompt(strategy).version.to_string(),
            counts: StatusCounts::default(),
            error_kinds: BTreeMap::new(),
        };
        for (sample, row) in samples.iter().zip(&rows) {
            let (record, kind) = &row[i];
            m.counts.add(record.status());
            if let Some(k) = kind {
                *m.error_kinds.entry(k.clone()).or_insert(0) += 1;
            }
            out.push_str(&encode_record(&DatasetLine::new(record.clone(), sample)));
            out.push('\n');
        }
        write_file(&layout.variant(strategy), out.as_bytes())?;
        manifests.insert(strategy.slug().to_string(), m);
    }

    let manifest = ConvertManifest {
        model_id: cfg.gateway.model_id.clone(),
        provider_id: gateway.provider().id(),
        seed: cfg.sampling.seed,
        sample_count: samples.len(),
        strategies: manifests,
        config: cfg.snapshot(),
    };
    write_json(&layout.convert_manifest(), &manifest)?;
    Ok(manifest)
}

/// Reads a variant file; every line must decode.
pub fn read_variant(path: &Path) -> Result<Vec<DatasetLine>, PipelineError> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            decode_record(l.as_bytes()).map_err(|e| PipelineError::BadLine {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------- merge

/// One classifier-ready row: cleaned title followed by the flattened
/// image description.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct MergedLine {
    pub id: String,
    pub text: String,
    pub strategy: StrategyKind,
    pub label2: Label2,
    pub label3: Label3,
    pub label6: Label6,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MergeSummary {
    pub written: BTreeMap<String, usize>,
    /// Lines left out: failed conversions and titles empty after cleaning.
    pub skipped: BTreeMap<String, usize>,
}

impl StageSummary for MergeSummary {
    fn sample_errors(&self) -> usize {
        0
    }
}

pub fn merge_line(line: &DatasetLine) -> Option<MergedLine> {
    let parsed = line.record.parsed()?;
    let title = clean_title(&line.title).ok()?;
    Some(MergedLine {
        id: line.record.sample_id().to_string(),
        text: merge(&title, &to_description_text(parsed)),
        strategy: line.record.strategy(),
        label2: line.label2,
        label3: line.label3,
        label6: line.label6,
    })
}

pub fn run_merge(cfg: &PipelineConfig) -> Result<MergeSummary, PipelineError> {
    let layout = cfg.layout();
    let mut summary = MergeSummary::default();
    for &strategy in &cfg.strategies {
        let lines = read_variant(&layout.variant(strategy))?;
        let mut out = String::new();
        let mut written = 0;
        for m in lines.iter().filter_map(merge_line) {
            out.push_str(&serde_json::to_string(&m).expect("serializable"));
            out.push('\n');
            written += 1;
        }
        write_file(&layout.merged(strategy), out.as_bytes())?;
        summary.written.insert(strategy.slug().into(), written);
        summary.skipped.insert(strategy.slug().into(), lines.len() - written);
    }
    Ok(summary)
}

// ---------------------------------------------------------------- metrics

struct ImageFeatures {
    raw: Vec<f64>,
    unit: Vec<f64>,
}

fn image_features(
    provider: &dyn FeatureProvider,
    proj: &ProjectionPair,
    cache: &ImageCache,
    sample: &Sample,
) -> Result<ImageFeatures, String> {
    let fetched = cache.fetch(&sample.image_ref).map_err(|e| format!("image: {e}"))?;
    let bytes = fs::read(&fetched.path).map_err(|e| format!("image: {e}"))?;
    let v = embed(provider, FeatureInput::Image(&bytes)).map_err(|e| e.to_string())?;
    let raw = proj.project(&v).map_err(|e| e.to_string())?;
    let unit = normalize(&raw).map_err(|e| format!("image projection: {e}"))?;
    Ok(ImageFeatures { raw, unit })
}

fn sample_metrics(
    provider: &dyn FeatureProvider,
    proj: &ProjectionPair,
    table: &WordNetDepthTable,
    cfg: &PipelineConfig,
    img: &ImageFeatures,
    line: &DatasetLine,
) -> Result<SampleMetrics, String> {
    let parsed = line.record.parsed().expect("ok lines only");
    let t_desc = to_description_text(parsed);
    let v = embed(provider, FeatureInput::Text(&t_desc)).map_err(|e| e.to_string())?;
    let p_t_raw = proj.project(&v).map_err(|e| e.to_string())?;
    let p_t = normalize(&p_t_raw).map_err(|e| format!("text projection: {e}"))?;

    let ipr = metrics::ipr(&img.unit, &p_t).map_err(|e| e.to_string())?;
    let mte = metrics::mte(&img.raw, &p_t_raw).map_err(|e| e.to_string())?;
    let (objects, _) = object_surrogate(parsed);
    let scs = metrics::scs(&objects, &cfg.metrics.scs_weights);
    let content = content_text(parsed);
    let iss = metrics::iss(&content, table);
    let sir = match graph_summary(parsed) {
        Some(g) => metrics::sir_graph(&g),
        None => metrics::sir_text(&content),
    };
    let ciqs = metrics::ciqs(ipr, scs, iss, sir, mte).map_err(|e| e.to_string())?;
    Ok(SampleMetrics {
        id: line.record.sample_id().to_string(),
        strategy: line.record.strategy(),
        ipr,
        scs,
        iss,
        sir,
        mte,
        ciqs,
    })
}

fn surrogate_kind(s: StrategyKind) -> SurrogateKind {
    match s {
        StrategyKind::ListOfObjects => SurrogateKind::Direct,
        StrategyKind::RelationalMapping | StrategyKind::SceneGraph => SurrogateKind::GraphNodes,
        _ => SurrogateKind::TextPhrases,
    }
}

/// Scores every ok line of every variant. Image features are computed once
/// per sample and one projection pair, drawn from the configured seed, is
/// shared by the whole run.
pub fn run_metrics(cfg: &PipelineConfig) -> Result<MetricReport, PipelineError> {
    let layout = cfg.layout();
    let samples = load_samples(&layout.sampled())?;
    let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let provider = cfg.feature_provider()?;
    let provider = provider.as_ref();
    let proj = make_projections(provider.image_dim(), provider.text_dim(), cfg.features.seed)?;
    let table = cfg.depth_table()?;
    let cache = cfg.image_cache()?;

    let mut lines = Vec::new();
    for &strategy in &cfg.strategies {
        lines.extend(
            read_variant(&layout.variant(strategy))?
                .into_iter()
                .filter(|l| l.record.status() == RecordStatus::Ok),
        );
    }
    let mut ids: Vec<&str> = lines.iter().map(|l| l.record.sample_id()).collect();
    ids.sort_unstable();
    ids.dedup();

    let workers = pool(cfg.images.workers)?;
    let features: HashMap<&str, Result<ImageFeatures, String>> = workers.install(|| {
        ids.par_iter()
            .map(|&id| {
                let f = match by_id.get(id) {
                    Some(s) => image_features(provider, &proj, &cache, s),
                    None => Err("not in the sampled set".to_string()),
                };
                (id, f)
            })
            .collect()
    });

    let results: Vec<Result<SampleMetrics, String>> = workers.install(|| {
        lines
            .par_iter()
            .map(|l| match &features[l.record.sample_id()] {
                Ok(img) => sample_metrics(provider, &proj, &table, cfg, img, l),
                Err(e) => Err(e.clone()),
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut notes = vec![
        "graph structural retention is an average of four terms each at most 1".to_string(),
        "relational graphs carry no node confidences; a fixed node confidence is used".to_string(),
    ];
    for (line, r) in lines.iter().zip(results) {
        match r {
            Ok(m) => rows.push(m),
            Err(e) => notes.push(format!(
                "skipped {}/{}: {e}",
                line.record.strategy().slug(),
                line.record.sample_id()
            )),
        }
    }
    let mut counted: Vec<&str> = rows.iter().map(|r| r.id.as_str()).collect();
    counted.sort_unstable();
    counted.dedup();

    let metadata = ReportMetadata {
        seed: cfg.features.seed,
        provider_id: provider.id().to_string(),
        sample_count: counted.len(),
        projection_dim: proj.d,
        std_kind: "population".into(),
        scs_weights: cfg.metrics.scs_weights,
        generic_terms_version: metrics::GENERIC_TERMS_VERSION.into(),
        relational_node_confidence: metrics::RELATIONAL_NODE_CONFIDENCE,
        depth_table_source: table.source().to_string(),
        scs_surrogates: cfg
            .strategies
            .iter()
            .map(|&s| (s.slug().to_string(), surrogate_kind(s)))
            .collect(),
        sir_kinds: cfg
            .strategies
            .iter()
            .map(|&s| {
                let kind = if s.is_graph() { SirKind::Graph } else { SirKind::Text };
                (s.slug().to_string(), kind)
            })
            .collect(),
        notes,
    };
    let report = MetricReport::new(metadata, rows);
    let mut json = report.to_json();
    json.push('\n');
    write_file(&layout.metrics_json(), json.as_bytes())?;
    write_file(&layout.metrics_txt(), report.render_table().as_bytes())?;
    Ok(report)
}

impl StageSummary for MetricReport {
    fn sample_errors(&self) -> usize {
        self.metadata
            .notes
            .iter()
            .filter(|n| n.starts_with("skipped "))
            .count()
    }
}

// ---------------------------------------------------------------- zeroshot

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ZeroShotSummary {
    pub predicted: usize,
    pub real: usize,
    pub fake: usize,
    /// Samples left out of the prediction file, by failure class.
    pub errors: BTreeMap<String, usize>,
}

impl StageSummary for ZeroShotSummary {
    fn sample_errors(&self) -> usize {
        self.errors.values().sum()
    }
}

#[derive(Serialize)]
struct RawReply<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Path of the raw-reply sidecar for a prediction file.
pub fn raw_sidecar(preds: &Path) -> PathBuf {
    preds.with_extension("raw.jsonl")
}

/// Classifies each sample as FAKE or REAL straight from the model's reply.
/// Rows whose request fails are excluded from the prediction file and
/// counted; their error class is kept in the sidecar.
pub fn run_zeroshot(
    cfg: &PipelineConfig,
    gateway: &Gateway,
    samples: &[Sample],
    preds_path: &Path,
) -> Result<ZeroShotSummary, PipelineError> {
    let cache = cfg.image_cache()?;
    let model = cfg.gateway.model_id.as_str();
    let outcomes: Vec<Result<crate::gateway::ZeroShotOutcome, String>> =
        pool(cfg.gateway.workers)?.install(|| {
            samples
                .par_iter()
                .map(|s| {
                    let image = load_image(&cache, &s.image_ref).map_err(|k| format!("image_{k}"))?;
                    zeroshot_classify(gateway, s, Some(image), model, cfg.gateway.temperature)
                        .map_err(|e| e.kind().to_string())
                })
                .collect()
        });

    let mut summary = ZeroShotSummary::default();
    let mut preds = PredictionFile::default();
    let mut sidecar = String::new();
    for (s, o) in samples.iter().zip(&outcomes) {
        let reply = match o {
            Ok(z) => {
                preds.records.push(report::Prediction {
                    id: s.id.clone(),
                    pred: z.prediction.code(),
                    task: Task::Two,
                });
                match z.prediction {
                    Label2::Real => summary.real += 1,
                    Label2::Fake => summary.fake += 1,
                }
                RawReply { id: &s.id, raw: Some(&z.raw), error: None }
            }
            Err(kind) => {
                *summary.errors.entry(kind.clone()).or_insert(0) += 1;
                RawReply { id: &s.id, raw: None, error: Some(kind) }
            }
        };
        sidecar.push_str(&serde_json::to_string(&reply).expect("serializable"));
        sidecar.push('\n');
    }
    summary.predicted = preds.records.len();
    write_file(preds_path, preds.to_jsonl().as_bytes())?;
    write_file(&raw_sidecar(preds_path), sidecar.as_bytes())?;
    Ok(summary)
}

// ---------------------------------------------------------------- report

/// Gold rows from a samples JSONL file or a tab-separated corpus.
pub fn load_gold(cfg: &PipelineConfig, path: &Path) -> Result<Vec<Sample>, PipelineError> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        return load_samples(path);
    }
    let mut src = cfg.corpus_source().unwrap_or_else(|_| crate::ingest::CorpusSource::new(path));
    src.path = path.to_path_buf();
    Ok(load_corpus(&src)?.samples)
}

/// Scores each prediction file (named after its file stem) and writes
/// `report.json` and `report.txt` into `out_dir`.
pub fn run_report(
    cfg: &PipelineConfig,
    preds: &[PathBuf],
    gold: &Path,
    task: Task,
    out_dir: &Path,
) -> Result<Vec<report::EvalSummary>, PipelineError> {
    let gold = load_gold(cfg, gold)?;
    let mut summaries = Vec::new();
    for p in preds {
        let file = PredictionFile::read(p)?;
        let model = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        summaries.push(report::evaluate(&model, &file, &gold, task)?);
    }
    let (text, json) = report::render_table(&summaries);
    write_json(&out_dir.join("report.json"), &json)?;
    write_file(&out_dir.join("report.txt"), text.as_bytes())?;
    Ok(summaries)
}

// ---------------------------------------------------------------- all

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub ingest: IngestSummary,
    pub sample: SampleSummary,
    pub convert: ConvertManifest,
    pub merge: MergeSummary,
}

impl StageSummary for RunSummary {
    fn sample_errors(&self) -> usize {
        self.ingest.sample_errors() + self.convert.sample_errors()
    }
}

/// ingest, sample, convert, merge and metrics in one call.
pub fn run_all(cfg: &PipelineConfig, gateway: &Gateway) -> Result<(RunSummary, MetricReport), PipelineError> {
    let ingest = run_ingest(cfg)?;
    let sample = run_sample(cfg)?;
    let convert = run_convert(cfg, gateway)?;
    let merge = run_merge(cfg)?;
    let metrics = run_metrics(cfg)?;
    Ok((
        RunSummary {
            ingest,
            sample,
            convert,
            merge,
        },
        metrics,
    ))
}
