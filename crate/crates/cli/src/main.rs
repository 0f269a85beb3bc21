use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use unite_core::pipeline::{self, PipelineConfig, StageSummary};
use unite_core::report::Task;

/// Turn image + title news corpora into text-only datasets and score the
/// results.
#[derive(Parser)]
#[command(name = "unite", version)]
struct Cli {
    /// TOML config file. Falls back to $UNITE_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tab-separated source corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Worker threads for image fetching and model calls.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Default)]
struct SampleOpts {
    /// Rows to draw; the whole population when omitted.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest allowed per-class proportion deviation.
    #[arg(long = "max-dev")]
    max_dev: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus and fetch images; rows with unusable images are dropped.
    Ingest(Common),
    /// Draw a class-stratified sample from the ingested rows.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sample: SampleOpts,
    },
    /// Run every configured prompting strategy over the sample.
    Convert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
    },
    /// Join cleaned titles with flattened descriptions.
    Merge(Common),
    /// Score the converted variants.
    Metrics(Common),
    /// All of ingest, sample, convert, merge and metrics.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sample: SampleOpts,
        #[arg(long)]
        model: Option<String>,
    },
    /// Score prediction files against gold labels.
    Report {
        /// Prediction JSONL files; each is reported under its file stem.
        #[arg(long, required = true, num_args = 1..)]
        preds: Vec<PathBuf>,
        /// Gold labels: a samples .jsonl file or a tab-separated corpus.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "two")]
        task: Task,
        /// Directory for report.json and report.txt.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Ask the model for FAKE or REAL directly.
    Zeroshot {
        #[arg(long)]
        model: Option<String>,
        /// Samples .jsonl file or tab-separated corpus.
        #[arg(long)]
        corpus: PathBuf,
        /// Prediction file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

impl Common {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(c) = &self.corpus {
            cfg.corpus.path = Some(c.clone());
        }
        if let Some(w) = self.workers {
            cfg.images.workers = w;
            cfg.gateway.workers = w;
        }
    }
}

impl SampleOpts {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.size.is_some() {
            cfg.sampling.size = self.size;
        }
        if let Some(s) = self.seed {
            cfg.sampling.seed = s;
        }
        if let Some(d) = self.max_dev {
            cfg.sampling.max_deviation = d;
        }
    }
}

fn print<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Runs one command and returns the number of per-row failures.
fn execute(cli: Cli) -> Result<usize> {
    let mut cfg = PipelineConfig::resolve(cli.config.as_deref())?;
    let set_model = |cfg: &mut PipelineConfig, m: &Option<String>| {
        if let Some(m) = m {
            cfg.gateway.model_id = m.clone();
        }
    };
    match &cli.command {
        Command::Ingest(c) | Command::Merge(c) | Command::Metrics(c) => c.apply(&mut cfg),
        Command::Sample { common, sample } => {
            common.apply(&mut cfg);
            sample.apply(&mut cfg);
        }
        Command::Convert { common, model } => {
            common.apply(&mut cfg);
            set_model(&mut cfg, model);
        }
        Command::Run { common, sample, model } => {
            common.apply(&mut cfg);
            sample.apply(&mut cfg);
            set_model(&mut cfg, model);
        }
        Command::Zeroshot { model, workers, .. } => {
            set_model(&mut cfg, model);
            if let Some(w) = *workers {
                cfg.gateway.workers = w;
                cfg.images.workers = w;
            }
        }
        Command::Report { .. } => {}
    }
    cfg.validate()?;

    let errors = match cli.command {
        Command::Ingest(_) => {
            let s = pipeline::run_ingest(&cfg)?;
            print(&s);
            s.sample_errors()
        }
        Command::Sample { .. } => {
            let s = pipeline::run_sample(&cfg)?;
            print(&s);
            s.sample_errors()
        }
        Command::Convert { .. } => {
            let gw = cfg.gateway()?;
            let m = pipeline::run_convert(&cfg, &gw)?;
            print(&json!({
                "totals": m.totals(),
                "network_calls": gw.network_calls(),
                "manifest": cfg.layout().convert_manifest(),
            }));
            m.sample_errors()
        }
        Command::Merge(_) => {
            let s = pipeline::run_merge(&cfg)?;
            print(&s);
            s.sample_errors()
        }
        Command::Metrics(_) => {
            let r = pipeline::run_metrics(&cfg)?;
            print!("{}", r.render_table());
            r.sample_errors()
        }
        Command::Run { .. } => {
            let gw = cfg.gateway()?;
            let (s, r) = pipeline::run_all(&cfg, &gw)?;
            print!("{}", r.render_table());
            s.sample_errors() + r.sample_errors()
        }
        Command::Report { preds, gold, task, out } => {
            let summaries = pipeline::run_report(&cfg, &preds, &gold, task, &out)?;
            print!("{}", unite_core::report::render_table(&summaries).0);
            0
        }
        Command::Zeroshot { corpus, out, .. } => {
            let samples = pipeline::load_gold(&cfg, &corpus)
                .with_context(|| format!("loading {}", corpus.display()))?;
            let s = pipeline::run_zeroshot(&cfg, &cfg.gateway()?, &samples, &out)?;
            print(&s);
            s.sample_errors()
        }
    };
    Ok(errors)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            log::warn!("{n} row(s) failed; see the stage outputs");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
