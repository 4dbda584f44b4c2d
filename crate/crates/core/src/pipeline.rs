//! Retrieve, prompt, translate: the composed system plus run manifests.

use std::fmt;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::EmbeddingProvider;
use crate::eval::{EvalPair, ReportMeta, SystemOutput, TranslationSystem};
use crate::index::HybridIndex;
use crate::llm::{LlmClient, LlmError, TranslationResult};
use crate::llm::Transport;
use crate::prompt::{FewShotPrompt, PromptBuilder, PromptError, Ranked};
use crate::retrieve::{DeepMode, Pipeline, Retrieval, RetrievalSettings, RetrieveError, Retriever};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("strategy {0} needs an index")]
    NoIndex(Strategy),
}

/// How the prompt is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Zero,
    P1,
    P2,
}

impl Strategy {
    pub fn retrieval(self) -> Option<Pipeline> {
        match self {
            Strategy::Zero => None,
            Strategy::P1 => Some(Pipeline::P1),
            Strategy::P2 => Some(Pipeline::P2),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Zero => "zero",
            Strategy::P1 => "p1",
            Strategy::P2 => "p2",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "0" | "zero" | "zero-shot" => Ok(Strategy::Zero),
            "1" | "p1" => Ok(Strategy::P1),
            "2" | "p2" => Ok(Strategy::P2),
            other => Err(format!("unknown pipeline {other:?} (expected zero, 1 or 2)")),
        }
    }
}

/// Pairs each retrieved candidate with its record.
pub fn resolve<'a>(index: &'a HybridIndex, retrieval: &Retrieval) -> Vec<Ranked<'a>> {
    retrieval
        .candidates
        .iter()
        .map(|c| Ranked { record: &index.records[c.row], score: c.blended })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub strategy: Strategy,
    /// Few-shot budget.
    pub n: usize,
    pub deep: DeepMode,
    pub parallelism: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { strategy: Strategy::P2, n: 5, deep: DeepMode::Auto, parallelism: 4 }
    }
}

pub struct RagTranslator<'a, T> {
    pub index: Option<&'a HybridIndex>,
    pub provider: &'a dyn EmbeddingProvider,
    pub retrieval: RetrievalSettings,
    pub builder: PromptBuilder,
    pub client: LlmClient<T>,
    pub settings: RunSettings,
}

impl<'a, T: Transport> RagTranslator<'a, T> {
    pub fn prompt(&self, input: &str, dialect: &str) -> Result<FewShotPrompt, PipelineError> {
        let strategy = self.settings.strategy;
        let Some(pipeline) = strategy.retrieval() else {
            return Ok(self.builder.build_zero_shot(input, dialect)?);
        };
        let index = self.index.ok_or(PipelineError::NoIndex(strategy))?;
        let retriever = Retriever::new(index, self.provider).with_settings(self.retrieval);
        let k = self.settings.n.max(1);
        let retrieval = retriever.retrieve(pipeline, input, dialect, k, self.settings.deep)?;
        let ranked = resolve(index, &retrieval);
        Ok(match pipeline {
            Pipeline::P1 => self.builder.build_p1(input, dialect, &ranked, self.settings.n)?,
            Pipeline::P2 => self.builder.build_p2(input, dialect, &ranked, self.settings.n)?,
        })
    }

    pub fn translate(&self, input: &str, dialect: &str) -> Result<TranslationResult, PipelineError> {
        let prompt = self.prompt(input, dialect)?;
        Ok(self.client.translate(&prompt)?)
    }

    /// Prompts and results for every pair, in input order.
    pub fn run(&self, pairs: &[EvalPair]) -> Vec<Result<TranslationResult, PipelineError>> {
        let prompts: Vec<Result<FewShotPrompt, PipelineError>> =
            pairs.iter().map(|p| self.prompt(&p.input, &p.dialect)).collect();
        let ready: Vec<FewShotPrompt> = prompts.iter().filter_map(|p| p.as_ref().ok().cloned()).collect();
        let mut done = self.client.translate_batch(&ready, self.settings.parallelism).into_iter();
        prompts
            .into_iter()
            .map(|p| match p {
                Ok(_) => done.next().expect("one result per prompt").map_err(PipelineError::from),
                Err(e) => Err(e),
            })
            .collect()
    }
}

impl<T: Transport> TranslationSystem for RagTranslator<'_, T> {
    fn meta(&self) -> ReportMeta {
        ReportMeta {
            dialect: String::new(),
            model: self.client.config().model.clone(),
            pipeline: self.settings.strategy.to_string(),
            n: self.settings.n,
            template_version: self.builder.templates.version.clone(),
            embedder: self.provider.model_id(),
        }
    }

    fn translate_all(&self, pairs: &[EvalPair]) -> Vec<SystemOutput> {
        self.run(pairs)
            .into_iter()
            .map(|r| match r {
                Ok(t) => SystemOutput::ok(t.output_text),
                Err(e) => SystemOutput::failed(e.to_string()),
            })
            .collect()
    }
}

/// Hex SHA-256 of a file's bytes, or of any byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce a translate or evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub run: RunSettings,
    /// Every prompt strategy covered by the run.
    pub pipelines: Vec<Strategy>,
    pub retrieval: RetrievalSettings,
    pub template_version: String,
    pub model: String,
    pub model_config_hash: String,
    pub embedder: String,
    pub corpus_checksum: Option<String>,
    pub index_checksum: Option<String>,
    pub pairs_checksum: Option<String>,
    pub replay: bool,
}

impl RunManifest {
    /// The manifest minus the timestamp, for comparing runs.
    pub fn fingerprint(&self) -> String {
        let mut m = self.clone();
        m.timestamp = 0;
        sha256_hex(serde_json::to_string(&m).expect("manifest serializes").as_bytes())
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusRecord;
    use crate::embedding::HashedNgramEmbedder;
    use crate::llm::{request_hash, FixtureEntry, ReplayTransport};
    use crate::llm::{ChatRequest, ModelConfig};

    fn index(e: &HashedNgramEmbedder) -> HybridIndex {
        let recs = vec![
            CorpusRecord::pair("1", "Sylhet", "ami bari jairam", "ami bari jachchi"),
            CorpusRecord::pair("2", "Sylhet", "tumi kita kheyso", "tumi ki kheyecho"),
            CorpusRecord::pair("3", "Rangpur", "mui bari jam", "ami bari jabo"),
        ];
        HybridIndex::build(recs, e).unwrap()
    }

    #[test]
    fn strategy_parse() {
        assert_eq!("2".parse::<Strategy>().unwrap(), Strategy::P2);
        assert_eq!("zero".parse::<Strategy>().unwrap(), Strategy::Zero);
        assert!("3".parse::<Strategy>().is_err());
    }

    #[test]
    fn p2_prompt_uses_dialect_examples_and_replays() {
        let e = HashedNgramEmbedder::new(64);
        let idx = index(&e);
        let cfg = ModelConfig::new("http://unused", "m");
        let mut t = RagTranslator {
            index: Some(&idx),
            provider: &e,
            retrieval: RetrievalSettings::default(),
            builder: PromptBuilder::default(),
            client: LlmClient::new(ReplayTransport::new(Vec::new()), cfg.clone()),
            settings: RunSettings { n: 2, ..Default::default() },
        };
        let p = t.prompt("ami bari jachchi", "sylhet").unwrap();
        assert_eq!(p.n_used, 2);
        assert_eq!(p.examples[0].id, "1");
        assert!(p.examples.iter().all(|x| x.id != "3"));

        let body = serde_json::json!({"choices":[{"message":{"content":"ami bari jairam"}}]}).to_string();
        let h = request_hash(&ChatRequest::for_prompt(&p, &cfg));
        t.client = LlmClient::new(ReplayTransport::new(vec![FixtureEntry::new(h, 200, &body, 0)]), cfg);
        assert_eq!(t.translate("ami bari jachchi", "Sylhet").unwrap().output_text, "ami bari jairam");
        assert!(matches!(t.translate("tumi", "Sylhet"), Err(PipelineError::Llm(LlmError::Replay(_)))));
        assert!(matches!(t.prompt("x", "Dhaka"), Err(PipelineError::Retrieve(RetrieveError::UnknownDialect(_)))));
    }
}
