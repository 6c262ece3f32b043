//! Labeled-utterance datasets and their JSON-lines file format:
//! one `{"text": ..., "intent": ...}` object per line. Generated data adds
//! `score` and `source` fields. A leading header object carrying only
//! `config_digest` is written by the commands and skipped on read.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: no examples")]
    Empty { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Example {
    pub text: String,
    pub intent: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Example {
    pub fn new(text: impl Into<String>, intent: impl Into<String>) -> Self {
        Example {
            text: text.into(),
            intent: intent.into(),
            score: None,
            source: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

#[derive(Deserialize)]
struct HeaderLine {
    #[allow(dead_code)]
    config_digest: String,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Self {
        Dataset { examples }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Intents in first-appearance order.
    pub fn intents(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for ex in &self.examples {
            if !seen.contains(&ex.intent) {
                seen.push(ex.intent.clone());
            }
        }
        seen
    }

    /// Examples grouped per intent, preserving order within each group.
    pub fn by_intent(&self) -> BTreeMap<String, Vec<&Example>> {
        let mut map: BTreeMap<String, Vec<&Example>> = BTreeMap::new();
        for ex in &self.examples {
            map.entry(ex.intent.clone()).or_default().push(ex);
        }
        map
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut examples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| DataError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Example>(&line) {
                Ok(ex) => examples.push(ex),
                Err(err) => {
                    // A digest header is allowed as the first non-empty line.
                    if serde_json::from_str::<HeaderLine>(&line).is_ok() {
                        continue;
                    }
                    return Err(DataError::Parse {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: err.to_string(),
                    });
                }
            }
        }
        if examples.is_empty() {
            return Err(DataError::Empty {
                path: path.display().to_string(),
            });
        }
        Ok(Dataset { examples })
    }

    pub fn save(&self, path: &Path, config_digest: Option<&str>) -> Result<(), DataError> {
        let mut out = String::new();
        if let Some(digest) = config_digest {
            out.push_str(&serde_json::json!({ "config_digest": digest }).to_string());
            out.push('\n');
        }
        for ex in &self.examples {
            out.push_str(&serde_json::to_string(ex).expect("example serializes"));
            out.push('\n');
        }
        write_atomic(path, out.as_bytes()).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let ds = Dataset::new(vec![
            Example::new("rate the book", "rate_book"),
            Example {
                text: "show my alarms".into(),
                intent: "alarm_query".into(),
                score: Some(-1.25),
                source: Some("generated".into()),
            },
        ]);
        ds.save(&path, Some("abc123")).unwrap();
        let loaded = Dataset::load(&path).unwrap();
        assert_eq!(loaded, ds);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"config_digest\":\"abc123\"}"));
    }

    #[test]
    fn parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"text\": \"ok\", \"intent\": \"a\"}\nnot json at all\n",
        )
        .unwrap();
        let err = Dataset::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "missing line number: {msg}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = Dataset::load(Path::new("/nonexistent/nowhere.jsonl")).unwrap_err();
        assert!(err.to_string().contains("nowhere.jsonl"));
    }

    #[test]
    fn intent_grouping() {
        let ds = Dataset::new(vec![
            Example::new("a", "x"),
            Example::new("b", "y"),
            Example::new("c", "x"),
        ]);
        assert_eq!(ds.intents(), vec!["x".to_string(), "y".to_string()]);
        assert_eq!(ds.by_intent()["x"].len(), 2);
    }
}
