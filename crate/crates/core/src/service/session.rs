use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SESSIONS_DIR: &str = "sessions";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRow {
    pub index: usize,
    pub token: String,
}

/// A prompt and the model's generated tokens. Immutable once created.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub prompt: String,
    pub tokens: Vec<TokenRow>,
}

impl Session {
    pub fn new(session_id: String, prompt: String, tokens: Vec<String>) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::Precondition(format!(
                "tokens must be non-empty and free of whitespace, got {bad:?}"
            )));
        }
        Ok(Session {
            session_id,
            prompt,
            tokens: tokens
                .into_iter()
                .enumerate()
                .map(|(index, token)| TokenRow { index, token })
                .collect(),
        })
    }

    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.token.as_str()).collect()
    }

    /// Generated text as handed to providers: tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.token_texts().join(" ")
    }

    /// Sorted, deduplicated token indices; all tokens when `None`.
    pub fn resolve_indices(&self, indices: Option<&[usize]>) -> Result<Vec<usize>> {
        resolve_indices(self.tokens.len(), indices)
    }
}

pub(crate) fn resolve_indices(n_tokens: usize, indices: Option<&[usize]>) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = match indices {
        None => (0..n_tokens).collect(),
        Some(ix) => ix.to_vec(),
    };
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(Error::Range("no tokens selected".into()));
    }
    if let Some(&bad) = out.iter().find(|&&i| i >= n_tokens) {
        return Err(Error::Range(format!(
            "token index {bad} out of range ({n_tokens} tokens)"
        )));
    }
    Ok(out)
}

/// Session files under `<workspace>/sessions/`.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn new(workspace: &Path) -> Self {
        SessionStore {
            dir: workspace.join(SESSIONS_DIR),
        }
    }

    /// Persist a new session under the next free id `s0001`, `s0002`, ...
    pub fn create(&self, prompt: String, tokens: Vec<String>) -> Result<Session> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut next = std::fs::read_dir(&self.dir)
            .map_err(|e| Error::io(&self.dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .count()
            + 1;
        let template = Session::new(String::new(), prompt, tokens)?;
        loop {
            let id = format!("s{next:04}");
            let path = self.path(&id);
            let session = Session {
                session_id: id,
                ..template.clone()
            };
            match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut file) => {
                    use std::io::Write;
                    let mut text = serde_json::to_string_pretty(&session)?;
                    text.push('\n');
                    file.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
                    return Ok(session);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => next += 1,
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
    }

    pub fn load(&self, session_id: &str) -> Result<Session> {
        if session_id.is_empty() || !session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(Error::NotFound(format!("session {session_id:?}")));
        }
        let path = self.path(session_id);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("session {session_id}")),
            _ => Error::io(&path, e),
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }
}
