use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use dialect_rag::corpus::{ingest as ingest_file, read_records, write_records, IngestOptions};
use dialect_rag::embedding::{EmbeddingProvider, HashedNgramEmbedder, HttpEmbedder, HttpEmbedderConfig};
use dialect_rag::eval::{evaluate_run, heatmap_csv, read_eval_pairs, reports_csv, EvalPair, MetricReport};
use dialect_rag::index::HybridIndex;
use dialect_rag::llm::{ApiKey, HttpTransport, LlmClient, ModelConfig, RecordingTransport, ReplayTransport, Transport};
use dialect_rag::pipeline::{now_unix, sha256_hex, RagTranslator, RunManifest, RunSettings, Strategy};
use dialect_rag::prompt::{PromptBuilder, TemplateSet};
use dialect_rag::retrieve::{DeepMode, Pipeline, RetrievalSettings, Retriever};

use crate::config::Settings;
use crate::error::CliError;
use crate::{EvaluateArgs, IndexArgs, IngestArgs, ModelArgs, QueryArgs, RetrievalArg, TranslateArgs};

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let opts = IngestOptions { lenient: a.lenient, csv: a.csv };
    let (records, stats) = ingest_file(&a.input, a.format.into(), opts)?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_records(&a.output, &records)?;
    log::info!("{} records ({} rejected) -> {}", stats.records, stats.rejected, a.output.display());
    if a.stats {
        stdout(&to_json(&stats))?;
    }
    Ok(())
}

fn http_embedder(url: &str, dim: usize) -> Box<dyn EmbeddingProvider> {
    Box::new(HttpEmbedder::new(HttpEmbedderConfig { dim, ..HttpEmbedderConfig::new(url) }))
}

pub fn index(a: IndexArgs, mut s: Settings) -> Result<(), CliError> {
    s.flag("dim", a.dim);
    s.flag("embed_url", a.embed_url);
    let dim: usize = s.parse("dim")?;
    if dim == 0 {
        return Err(CliError::Usage("--dim must be positive".into()));
    }
    let records = read_records(&a.corpus)?;
    let provider: Box<dyn EmbeddingProvider> = match s.get("embed_url") {
        Some(url) => http_embedder(&url, dim),
        None => Box::new(HashedNgramEmbedder::new(dim)),
    };
    let index = HybridIndex::build(records, provider.as_ref())?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    index.save(&a.output)?;
    log::info!("indexed {} records (dim {}) -> {}", index.len(), index.dim(), a.output.display());
    Ok(())
}

/// The embedder an index was built with: the hashed embedder is rebuilt
/// locally, anything else needs the embedding service.
fn provider_for(index: &HybridIndex, s: &Settings) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    let local = HashedNgramEmbedder::new(index.dim());
    if index.embedder == local.model_id() {
        return Ok(Box::new(local));
    }
    match s.get("embed_url") {
        Some(url) => Ok(http_embedder(&url, index.dim())),
        None => Err(CliError::Usage(format!(
            "index was built with embedder {:?}; set EMBED_URL or --embed-url",
            index.embedder
        ))),
    }
}

struct LoadedIndex {
    index: HybridIndex,
    checksum: String,
    corpus_checksum: String,
}

fn load_index(path: &Path) -> Result<LoadedIndex, CliError> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Data(format!("file not found: {}", path.display())),
        _ => CliError::Data(e.to_string()),
    })?;
    let index = HybridIndex::from_bytes(&bytes)?;
    let corpus = index.records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect::<String>();
    Ok(LoadedIndex { checksum: sha256_hex(&bytes), corpus_checksum: sha256_hex(corpus.as_bytes()), index })
}

#[derive(Serialize)]
struct QueryRow<'a> {
    rank: usize,
    id: &'a str,
    district: &'a str,
    score: f64,
    dense: f64,
    sparse: f64,
    standard: &'a str,
    local: &'a str,
}

pub fn query(a: QueryArgs, mut s: Settings) -> Result<(), CliError> {
    s.flag("deep", a.deep.map(|d| serde_json::to_value(d).unwrap().as_str().unwrap().to_string()));
    s.flag("k", a.k);
    s.flag("embed_url", a.embed_url);
    let loaded = load_index(&a.index)?;
    let provider = provider_for(&loaded.index, &s)?;
    let pipeline = match a.pipeline {
        RetrievalArg::P1 => Pipeline::P1,
        RetrievalArg::P2 => Pipeline::P2,
    };
    let retrieval = Retriever::new(&loaded.index, provider.as_ref()).retrieve(
        pipeline,
        &a.text,
        &a.dialect,
        s.parse("k")?,
        s.parse::<DeepMode>("deep")?,
    )?;
    let rows: Vec<QueryRow> = retrieval
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let r = &loaded.index.records[c.row];
            QueryRow {
                rank: i + 1,
                id: &c.id,
                district: &c.district,
                score: c.blended,
                dense: c.dense_norm,
                sparse: c.sparse_norm,
                standard: &r.standard_norm,
                local: r.local_text(),
            }
        })
        .collect();
    let out = if a.explain {
        to_json(&serde_json::json!({ "candidates": rows, "explain": retrieval.explain }))
    } else {
        to_json(&serde_json::json!({ "candidates": rows }))
    };
    stdout(&out)
}

/// Everything `translate` and `evaluate` need besides their inputs.
struct RunContext {
    index: Option<LoadedIndex>,
    provider: Box<dyn EmbeddingProvider>,
    builder: PromptBuilder,
    model: ModelConfig,
    settings: RunSettings,
    out_dir: PathBuf,
    replay: Option<PathBuf>,
    record: Option<PathBuf>,
}

fn run_context(
    m: ModelArgs,
    mut s: Settings,
    index: Option<&Path>,
    strategy: Strategy,
    needs_index: bool,
    default_out: &str,
) -> Result<RunContext, CliError> {
    s.flag("n", m.n);
    s.flag("deep", m.deep.map(|d| serde_json::to_value(d).unwrap().as_str().unwrap().to_string()));
    s.flag("llm_model", m.model);
    s.flag("llm_url", m.llm_url);
    s.flag("parallelism", m.parallelism);
    s.flag("embed_url", m.embed_url);
    s.flag("template_dir", m.template_dir.map(|p| p.display().to_string()));

    let index = match index {
        Some(p) => Some(load_index(p)?),
        None if needs_index => return Err(CliError::Usage("--index is required for pipelines 1 and 2".into())),
        None => None,
    };
    let provider = match &index {
        Some(l) => provider_for(&l.index, &s)?,
        None => match s.get("embed_url") {
            Some(url) => http_embedder(&url, s.parse("dim")?),
            None => Box::new(HashedNgramEmbedder::new(s.parse("dim")?)),
        },
    };
    let templates = match s.get("template_dir") {
        Some(dir) => TemplateSet::from_dir(Path::new(&dir))?,
        None => TemplateSet::default(),
    };
    let mut model = ModelConfig::new(s.get("llm_url").unwrap_or_default(), s.get("llm_model").unwrap_or_default());
    model.api_key = s.get("llm_api_key").map(ApiKey::new).unwrap_or_default();
    model.temperature = s.parse("temperature")?;
    model.max_tokens = s.parse("max_tokens")?;
    model.max_retries = s.parse("max_retries")?;
    model.timeout = Duration::from_secs_f64(s.parse("timeout_secs")?);
    let settings = RunSettings {
        strategy,
        n: s.parse("n")?,
        deep: s.parse("deep")?,
        parallelism: s.parse::<usize>("parallelism")?.max(1),
    };
    Ok(RunContext {
        index,
        provider,
        builder: PromptBuilder::new(templates),
        model,
        settings,
        out_dir: m.out_dir.unwrap_or_else(|| PathBuf::from(default_out)),
        replay: m.replay,
        record: m.record,
    })
}

impl RunContext {
    fn translator<'a>(&'a self, transport: &'a dyn Transport, strategy: Strategy) -> RagTranslator<'a, &'a dyn Transport> {
        RagTranslator {
            index: self.index.as_ref().map(|l| &l.index),
            provider: self.provider.as_ref(),
            retrieval: RetrievalSettings::default(),
            builder: self.builder.clone(),
            client: LlmClient::new(transport, self.model.clone()),
            settings: RunSettings { strategy, ..self.settings.clone() },
        }
    }

    /// Runs `f` with the transport selected by --replay / --record, saving
    /// recorded fixtures afterwards.
    fn with_transport<R>(&self, f: impl FnOnce(&dyn Transport) -> R) -> Result<R, CliError> {
        if let Some(path) = &self.replay {
            let replay = ReplayTransport::from_file(path)
                .map_err(|e| CliError::Data(format!("cannot read fixtures {}: {e}", path.display())))?;
            return Ok(f(&replay));
        }
        let http = HttpTransport::new(self.model.timeout);
        match &self.record {
            Some(path) => {
                let recorder = RecordingTransport::new(http);
                let out = f(&recorder);
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                recorder.save(path)?;
                Ok(out)
            }
            None => Ok(f(&http)),
        }
    }

    fn manifest(&self, command: &str, pipelines: Vec<Strategy>, pairs: Option<&Path>) -> Result<RunManifest, CliError> {
        let pairs_checksum = match pairs {
            Some(p) => Some(sha256_hex(&std::fs::read(p)?)),
            None => None,
        };
        Ok(RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: now_unix(),
            run: self.settings.clone(),
            pipelines,
            retrieval: RetrievalSettings::default(),
            template_version: self.builder.templates.version.clone(),
            model: self.model.model.clone(),
            model_config_hash: self.model.config_hash(),
            embedder: self.provider.model_id(),
            corpus_checksum: self.index.as_ref().map(|l| l.corpus_checksum.clone()),
            index_checksum: self.index.as_ref().map(|l| l.checksum.clone()),
            pairs_checksum,
            replay: self.replay.is_some(),
        })
    }

    fn write_manifest(&self, m: &RunManifest) -> Result<(), CliError> {
        write_file(&self.out_dir.join("manifest.json"), to_json(m).as_bytes())
    }
}

#[derive(Serialize)]
struct TranslationRow<'a> {
    id: &'a str,
    dialect: &'a str,
    input: &'a str,
    output: Option<String>,
    error: Option<String>,
    prompt_id: Option<String>,
    attempts: Option<u32>,
}

pub fn translate(a: TranslateArgs, s: Settings) -> Result<(), CliError> {
    let strategy = a.pipeline;
    let ctx = run_context(a.model, s, a.index.as_deref(), strategy, strategy != Strategy::Zero, "runs/translate")?;
    let pairs: Vec<EvalPair> = match (&a.text, &a.pairs) {
        (Some(text), _) => vec![EvalPair {
            id: "1".into(),
            input: text.clone(),
            reference: String::new(),
            dialect: a.dialect.clone().unwrap_or_default(),
        }],
        (None, Some(p)) => read_eval_pairs(p)?,
        (None, None) => return Err(CliError::Usage("give --text or --pairs".into())),
    };
    let pairs: Vec<EvalPair> = match &a.dialect {
        Some(d) => pairs.into_iter().map(|p| EvalPair { dialect: d.clone(), ..p }).collect(),
        None => pairs,
    };

    if a.dry_run {
        let none = ReplayTransport::new(Vec::new());
        let t = ctx.translator(&none, strategy);
        if a.text.is_some() {
            return stdout(&t.prompt(&pairs[0].input, &pairs[0].dialect)?.text);
        }
        let mut out = String::new();
        for p in &pairs {
            let prompt = t.prompt(&p.input, &p.dialect)?;
            out.push_str(&serde_json::to_string(&prompt).expect("prompt serializes"));
            out.push('\n');
        }
        return stdout(&out);
    }

    let results = ctx.with_transport(|t| ctx.translator(t, strategy).run(&pairs))?;
    ctx.write_manifest(&ctx.manifest("translate", vec![strategy], a.pairs.as_deref())?)?;
    if a.text.is_some() {
        let r = results.into_iter().next().expect("one input");
        return stdout(&(r?.output_text + "\n"));
    }
    let mut out = String::new();
    let mut failed = 0;
    for (p, r) in pairs.iter().zip(results) {
        let (output, error, prompt_id, attempts) = match r {
            Ok(t) => (Some(t.output_text), None, Some(t.prompt_id), Some(t.attempts)),
            Err(e) => {
                failed += 1;
                (None, Some(e.to_string()), None, None)
            }
        };
        let row = TranslationRow { id: &p.id, dialect: &p.dialect, input: &p.input, output, error, prompt_id, attempts };
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    write_file(&ctx.out_dir.join("translations.jsonl"), out.as_bytes())?;
    if failed > 0 {
        log::warn!("{failed} of {} translations failed", pairs.len());
    }
    if failed == pairs.len() {
        return Err(if ctx.replay.is_some() {
            CliError::Data("no translation could be served from the fixtures".into())
        } else {
            CliError::Network(format!("all {failed} translations failed"))
        });
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, s: Settings) -> Result<(), CliError> {
    let mut pipelines = a.pipeline.clone();
    pipelines.dedup();
    let needs_index = pipelines.iter().any(|p| *p != Strategy::Zero);
    let ctx = run_context(a.model, s, a.index.as_deref(), pipelines[0], needs_index, "runs/evaluate")?;
    let pairs = read_eval_pairs(&a.pairs)?;
    if pairs.is_empty() {
        return Err(CliError::Data(format!("{} has no pairs", a.pairs.display())));
    }

    let runs = ctx.with_transport(|t| {
        pipelines
            .iter()
            .map(|&p| evaluate_run(&pairs, &ctx.translator(t, p), ctx.provider.as_ref()))
            .collect::<Vec<_>>()
    })?;
    let mut reports: Vec<MetricReport> = Vec::new();
    for r in runs {
        match r {
            Ok(rs) => reports.extend(rs),
            Err(dialect_rag::eval::EvalError::AllFailed(n)) if ctx.replay.is_some() => {
                return Err(CliError::Data(format!("none of {n} translations could be served from the fixtures")))
            }
            Err(e) => return Err(e.into()),
        }
    }

    write_file(&ctx.out_dir.join("report.json"), to_json(&reports).as_bytes())?;
    write_file(&ctx.out_dir.join("report.csv"), reports_csv(&reports).as_bytes())?;
    if let Some(path) = &a.heatmap_csv {
        write_file(path, heatmap_csv(&reports, a.heatmap_metric).as_bytes())?;
    }
    ctx.write_manifest(&ctx.manifest("evaluate", pipelines, Some(&a.pairs))?)?;

    let summary: Vec<BTreeMap<&str, serde_json::Value>> = reports
        .iter()
        .map(|r| {
            BTreeMap::from([
                ("dialect", r.meta.dialect.clone().into()),
                ("pipeline", r.meta.pipeline.clone().into()),
                ("n", r.n_sentences.into()),
                ("missing", r.n_missing.into()),
                ("bleu", r.bleu.into()),
                ("chrf", r.chrf.into()),
                ("wer", r.wer.into()),
                ("bertscore_f1", r.bertscore_f1.into()),
            ])
        })
        .collect();
    stdout(&to_json(&summary))
}
