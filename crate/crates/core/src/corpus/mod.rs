//! Training documents, display snippets and TF-IDF keywords.

mod tfidf;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use tfidf::{
    is_stopword, keywords, terms, Keyword, KeywordList, TfidfIndex, DEFAULT_KEYWORD_COUNT,
};

pub const DEFAULT_SNIPPET_WORDS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingDoc {
    pub example_id: usize,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}

/// Training documents in training order; `docs[i].example_id == i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<TrainingDoc>,
}

impl Corpus {
    /// Build from `(text, metadata)` pairs, assigning ids by position.
    pub fn from_texts<I>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, BTreeMap<String, String>)>,
    {
        let docs: Vec<TrainingDoc> = items
            .into_iter()
            .enumerate()
            .map(|(example_id, (text, metadata))| TrainingDoc {
                example_id,
                text,
                metadata,
            })
            .collect();
        if docs.is_empty() {
            return Err(Error::Precondition("corpus is empty".into()));
        }
        Ok(Corpus { docs })
    }

    /// Parse JSON lines: `{"text": string, <key>: string, ...}`.
    pub fn parse(source: &str) -> Result<Self> {
        let mut docs = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let serde_json::Value::Object(fields) = value else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected a JSON object".into(),
                });
            };
            let mut text = None;
            let mut metadata = BTreeMap::new();
            for (key, v) in fields {
                let serde_json::Value::String(s) = v else {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("field {key:?} must be a string"),
                    });
                };
                if key == "text" {
                    text = Some(s);
                } else {
                    metadata.insert(key, s);
                }
            }
            let text = text.ok_or_else(|| Error::Parse {
                line: line_no,
                message: "missing \"text\" field".into(),
            })?;
            docs.push(TrainingDoc {
                example_id: idx,
                text,
                metadata,
            });
        }
        if docs.is_empty() {
            return Err(Error::Precondition("corpus file is empty".into()));
        }
        Ok(Corpus { docs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("corpus {}", path.display())),
            _ => Error::io(path, e),
        })?;
        Self::parse(&source)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            let mut obj = serde_json::Map::new();
            obj.insert("text".into(), doc.text.clone().into());
            for (k, v) in &doc.metadata {
                obj.insert(k.clone(), v.clone().into());
            }
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[TrainingDoc] {
        &self.docs
    }

    pub fn get(&self, example_id: usize) -> Result<&TrainingDoc> {
        self.docs.get(example_id).ok_or_else(|| {
            Error::NotFound(format!(
                "example {example_id} (corpus has {} documents)",
                self.docs.len()
            ))
        })
    }
}

/// The first `n_words` whitespace-separated words, with "…" if cut short.
pub fn snippet(text: &str, n_words: usize) -> String {
    let n_words = n_words.max(1);
    let mut words = text.split_whitespace();
    let head: Vec<&str> = words.by_ref().take(n_words).collect();
    let mut out = head.join(" ");
    if words.next().is_some() {
        out.push('…');
    }
    out
}
