//! Zero-shot and few-shot prompt rendering.
//!
//! Templates are plain text with `{dialect}`, `{input}` and `{examples}`
//! placeholders, substituted in a single pass so placeholder-like text inside
//! the input is never expanded.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{canonical_district, CorpusRecord};

pub const BUILTIN_TEMPLATE_VERSION: &str = "builtin-v1";
pub const DEFAULT_CHAR_BUDGET: usize = 8000;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("empty input sentence")]
    EmptyInput,
    #[error("template {name}: {reason}")]
    Template { name: String, reason: String },
    #[error("I/O error reading templates: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Zero,
    P1,
    P2,
}

impl PromptKind {
    fn file_name(self) -> &'static str {
        match self {
            PromptKind::Zero => "zero.txt",
            PromptKind::P1 => "p1.txt",
            PromptKind::P2 => "p2.txt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub version: String,
    pub zero: String,
    pub p1: String,
    pub p2: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            version: BUILTIN_TEMPLATE_VERSION.to_string(),
            zero: include_str!("../templates/zero.txt").to_string(),
            p1: include_str!("../templates/p1.txt").to_string(),
            p2: include_str!("../templates/p2.txt").to_string(),
        }
    }
}

impl TemplateSet {
    /// Loads `zero.txt`, `p1.txt` and `p2.txt` from `dir`. The version is
    /// derived from the file contents.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |kind: PromptKind| std::fs::read_to_string(dir.join(kind.file_name()));
        let (zero, p1, p2) = (read(PromptKind::Zero)?, read(PromptKind::P1)?, read(PromptKind::P2)?);
        let mut hasher = Sha256::new();
        for t in [&zero, &p1, &p2] {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        let version = format!("custom-{}", &hex::encode(hasher.finalize())[..12]);
        let set = TemplateSet { version, zero, p1, p2 };
        set.validate()?;
        Ok(set)
    }

    fn get(&self, kind: PromptKind) -> &str {
        match kind {
            PromptKind::Zero => &self.zero,
            PromptKind::P1 => &self.p1,
            PromptKind::P2 => &self.p2,
        }
    }

    fn validate(&self) -> Result<(), PromptError> {
        for kind in [PromptKind::Zero, PromptKind::P1, PromptKind::P2] {
            let t = self.get(kind);
            let count = |p: &str| t.matches(p).count();
            let bad = |reason: &str| PromptError::Template { name: kind.file_name().into(), reason: reason.into() };
            if count("{input}") != 1 {
                return Err(bad("must contain {input} exactly once"));
            }
            if count("{dialect}") == 0 {
                return Err(bad("must contain {dialect}"));
            }
            if kind != PromptKind::Zero && count("{examples}") != 1 {
                return Err(bad("must contain {examples} exactly once"));
            }
        }
        Ok(())
    }
}

/// A record with the score it was ranked by.
#[derive(Debug, Clone, Copy)]
pub struct Ranked<'a> {
    pub record: &'a CorpusRecord,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptExample {
    pub id: String,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotPrompt {
    pub text: String,
    pub examples: Vec<PromptExample>,
    pub n_requested: usize,
    pub n_used: usize,
    pub kind: PromptKind,
    pub dialect: String,
    pub input_sentence: String,
    pub template_version: String,
}

impl FewShotPrompt {
    /// Stable identifier: SHA-256 of the prompt text, hex.
    pub fn prompt_id(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

fn substitute(template: &str, dialect: &str, input: &str, examples: &str) -> String {
    let mut out = String::with_capacity(template.len() + input.len() + examples.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let (value, len) = if tail.starts_with("{dialect}") {
            (dialect, "{dialect}".len())
        } else if tail.starts_with("{input}") {
            (input, "{input}".len())
        } else if tail.starts_with("{examples}") {
            (examples, "{examples}".len())
        } else {
            ("{", 1)
        };
        out.push_str(value);
        rest = &tail[len..];
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone)]
pub struct PromptBuilder {
    pub templates: TemplateSet,
    /// Maximum prompt length in characters; examples are dropped from the
    /// tail until the prompt fits.
    pub char_budget: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder { templates: TemplateSet::default(), char_budget: DEFAULT_CHAR_BUDGET }
    }
}

impl PromptBuilder {
    pub fn new(templates: TemplateSet) -> Self {
        PromptBuilder { templates, ..Default::default() }
    }

    pub fn build_zero_shot(&self, input: &str, dialect: &str) -> Result<FewShotPrompt, PromptError> {
        self.render(PromptKind::Zero, input, dialect, Vec::new(), 0)
    }

    /// Transcript examples: dialect text only, in candidate order.
    pub fn build_p1(&self, input: &str, dialect: &str, candidates: &[Ranked<'_>], n: usize) -> Result<FewShotPrompt, PromptError> {
        let examples = candidates
            .iter()
            .take(n)
            .map(|c| (c.record.id.clone(), c.record.local_text().to_string()))
            .collect();
        self.render(PromptKind::P1, input, dialect, examples, n)
    }

    /// Standard -> local pairs from the target dialect, highest score first.
    pub fn build_p2(&self, input: &str, dialect: &str, candidates: &[Ranked<'_>], n: usize) -> Result<FewShotPrompt, PromptError> {
        let dialect_c = canonical_district(dialect);
        let mut kept: Vec<&Ranked<'_>> = candidates.iter().filter(|c| c.record.district == dialect_c).collect();
        kept.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.record.id.cmp(&b.record.id)));
        let examples = kept
            .into_iter()
            .take(n)
            .map(|c| {
                let r = c.record;
                (r.id.clone(), format!("STANDARD: {} → LOCAL: {}", r.standard_norm, r.local_text()))
            })
            .collect();
        self.render(PromptKind::P2, input, dialect, examples, n)
    }

    fn render(
        &self,
        kind: PromptKind,
        input: &str,
        dialect: &str,
        mut examples: Vec<(String, String)>,
        n_requested: usize,
    ) -> Result<FewShotPrompt, PromptError> {
        let input = input.trim();
        if input.is_empty() {
            return Err(PromptError::EmptyInput);
        }
        let dialect = canonical_district(dialect);
        let template = self.templates.get(kind);
        let text = loop {
            let block = examples
                .iter()
                .enumerate()
                .map(|(i, (_, e))| format!("{}. {e}", i + 1))
                .collect::<Vec<_>>()
                .join("\n");
            let text = substitute(template, &dialect, input, &block);
            if examples.is_empty() || text.chars().count() <= self.char_budget {
                break text;
            }
            examples.pop();
        };
        let examples: Vec<PromptExample> = examples
            .into_iter()
            .enumerate()
            .map(|(i, (id, e))| PromptExample { id, rendered: format!("{}. {e}", i + 1) })
            .collect();
        Ok(FewShotPrompt {
            text,
            n_used: examples.len(),
            examples,
            n_requested,
            kind,
            dialect,
            input_sentence: input.to_string(),
            template_version: self.templates.version.clone(),
        })
    }
}
