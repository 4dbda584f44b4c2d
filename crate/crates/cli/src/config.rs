//! Layered settings: command-line flags, then environment, then a
//! `key = value` config file, then built-in defaults.
//!
//! The file format is one `key = value` pair per line. Blank lines and lines
//! starting with `#` are ignored; values may be wrapped in double quotes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// Recognized keys with their environment variable and default.
pub const KEYS: &[(&str, &str, Option<&str>)] = &[
    ("llm_url", "LLM_URL", Some("http://localhost:8000/v1/chat/completions")),
    ("llm_model", "LLM_MODEL", Some("unspecified")),
    ("llm_api_key", "LLM_API_KEY", None),
    ("embed_url", "EMBED_URL", None),
    ("dim", "DIALECT_RAG_DIM", Some("768")),
    ("n", "DIALECT_RAG_N", Some("5")),
    ("k", "DIALECT_RAG_K", Some("5")),
    ("deep", "DIALECT_RAG_DEEP", Some("auto")),
    ("parallelism", "DIALECT_RAG_PARALLELISM", Some("4")),
    ("temperature", "DIALECT_RAG_TEMPERATURE", Some("0")),
    ("max_tokens", "DIALECT_RAG_MAX_TOKENS", Some("256")),
    ("max_retries", "DIALECT_RAG_MAX_RETRIES", Some("3")),
    ("timeout_secs", "DIALECT_RAG_TIMEOUT_SECS", Some("60")),
    ("template_dir", "DIALECT_RAG_TEMPLATE_DIR", None),
];

pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if !KEYS.iter().any(|(name, _, _)| *name == k) {
            return Err(CliError::Usage(format!("config line {}: unknown key {k:?}", i + 1)));
        }
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(v);
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    flags: BTreeMap<String, String>,
    env: BTreeMap<String, String>,
    file: BTreeMap<String, String>,
}

impl Settings {
    /// Loads the environment and, if given (or named by `DIALECT_RAG_CONFIG`),
    /// the config file.
    pub fn load(config: Option<&Path>) -> Result<Self, CliError> {
        let env: BTreeMap<String, String> = KEYS
            .iter()
            .filter_map(|(k, var, _)| {
                std::env::var(var).ok().filter(|v| !v.trim().is_empty()).map(|v| (k.to_string(), v))
            })
            .collect();
        let path = config.map(Path::to_path_buf).or_else(|| std::env::var_os("DIALECT_RAG_CONFIG").map(Into::into));
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_file(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Settings { flags: BTreeMap::new(), env, file })
    }

    #[cfg(test)]
    pub fn from_layers(
        flags: BTreeMap<String, String>,
        env: BTreeMap<String, String>,
        file: BTreeMap<String, String>,
    ) -> Self {
        Settings { flags, env, file }
    }

    /// Records a flag value; `None` leaves lower layers in charge.
    pub fn flag(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.flags.insert(key.to_string(), v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.flags
            .get(key)
            .or_else(|| self.env.get(key))
            .or_else(|| self.file.get(key))
            .cloned()
            .or_else(|| KEYS.iter().find(|(k, _, _)| *k == key).and_then(|(_, _, d)| d.map(String::from)))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| CliError::Usage(format!("missing setting {key}")))?;
        raw.parse().map_err(|e| CliError::Usage(format!("invalid {key} {raw:?}: {e}")))
    }
}
