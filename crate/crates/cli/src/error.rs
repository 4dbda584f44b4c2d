use std::fmt;

use dialect_rag::corpus::CorpusError;
use dialect_rag::embedding::EmbedError;
use dialect_rag::eval::EvalError;
use dialect_rag::index::IndexError;
use dialect_rag::llm::LlmError;
use dialect_rag::pipeline::PipelineError;
use dialect_rag::prompt::PromptError;
use dialect_rag::retrieve::RetrieveError;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Bad or missing input data (exit 3).
    Data(String),
    /// Remote service failure (exit 4).
    Network(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Network(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Network(m) => write!(f, "network error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::ProviderUnavailable(_) => CliError::Network(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::Embed(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<RetrieveError> for CliError {
    fn from(e: RetrieveError) -> Self {
        match e {
            RetrieveError::Embed(inner) => inner.into(),
            RetrieveError::Index(inner) => inner.into(),
            RetrieveError::InvalidK => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Template { .. } => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Config(_) => CliError::Usage(e.to_string()),
            LlmError::Replay(_) => CliError::Data(e.to_string()),
            other => CliError::Network(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Retrieve(x) => x.into(),
            PipelineError::Prompt(x) => x.into(),
            PipelineError::Llm(x) => x.into(),
            PipelineError::NoIndex(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Embed(inner) => inner.into(),
            EvalError::AllFailed(_) => CliError::Network(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
