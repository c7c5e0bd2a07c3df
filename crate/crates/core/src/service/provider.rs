//! Gradient providers turn a model plus an example (train mode) or a test
//! query (test mode) into a single-example gradient shard.
//!
//! External providers speak a subprocess protocol: one JSON request on
//! standard input, the written shard's path on standard output, and a nonzero
//! exit status with a diagnostic on standard error on failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ProviderRequest {
    Train {
        checkpoint_id: u32,
        example_id: usize,
        output_path: PathBuf,
    },
    Test {
        checkpoint_id: u32,
        prompt: String,
        text: String,
        token_indices: Vec<usize>,
        output_path: PathBuf,
    },
}

impl ProviderRequest {
    pub fn output_path(&self) -> &Path {
        match self {
            ProviderRequest::Train { output_path, .. } | ProviderRequest::Test { output_path, .. } => {
                output_path
            }
        }
    }

    pub fn checkpoint_id(&self) -> u32 {
        match self {
            ProviderRequest::Train { checkpoint_id, .. } | ProviderRequest::Test { checkpoint_id, .. } => {
                *checkpoint_id
            }
        }
    }
}

pub trait GradientProvider: Send + Sync {
    /// Write the requested gradient as a single-example shard and return its path.
    fn gradient(&self, request: &ProviderRequest) -> Result<PathBuf>;

    /// Split generated text into tokens. Token `i` of the returned list is
    /// what `token_indices` refer to in test requests.
    fn tokenize(&self, text: &str) -> Vec<String> {
        whitespace_tokens(text)
    }
}

pub fn whitespace_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Provider backed by an external command.
#[derive(Debug, Clone)]
pub struct SubprocessProvider {
    argv: Vec<String>,
}

impl SubprocessProvider {
    pub fn new(argv: Vec<String>) -> Result<Self> {
        if argv.is_empty() {
            return Err(Error::Provider("provider command is empty".into()));
        }
        Ok(SubprocessProvider { argv })
    }

    pub fn argv(&self) -> &[String] {
        &self.argv
    }
}

impl GradientProvider for SubprocessProvider {
    fn gradient(&self, request: &ProviderRequest) -> Result<PathBuf> {
        let describe = || match request {
            ProviderRequest::Train {
                checkpoint_id,
                example_id,
                ..
            } => format!("train checkpoint {checkpoint_id} example {example_id}"),
            ProviderRequest::Test { checkpoint_id, .. } => format!("test checkpoint {checkpoint_id}"),
        };
        let payload = serde_json::to_vec(request)?;
        let mut child = Command::new(&self.argv[0])
            .args(&self.argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Provider(format!("cannot start {:?}: {e}", self.argv[0])))?;
        {
            let mut stdin = child.stdin.take().expect("stdin piped");
            stdin
                .write_all(&payload)
                .map_err(|e| Error::Provider(format!("{}: writing request: {e}", describe())))?;
        }
        let output = child
            .wait_with_output()
            .map_err(|e| Error::Provider(format!("{}: {e}", describe())))?;
        if !output.status.success() {
            return Err(Error::Provider(format!(
                "{} failed ({}): {}",
                describe(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let path = stdout.trim();
        if path.is_empty() {
            return Err(Error::Provider(format!("{}: no shard path on stdout", describe())));
        }
        Ok(PathBuf::from(path))
    }
}
