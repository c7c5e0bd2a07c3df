//! Fills in missing gradient shards by calling the provider in train mode.
//!
//! Each (checkpoint, example) gradient is first staged as its own
//! single-example shard under `staging/ckpt_<id>/`. Once a checkpoint is
//! complete its staged files are concatenated into the final shard through a
//! temp file and rename, and the staging directory is removed. An interrupted
//! run therefore resumes from the last staged example.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::provider::{GradientProvider, ProviderRequest};
use crate::error::{Error, Result};
use crate::store::{read_shard_header, CheckpointMeta, GradientManifest, ShardWriter, TestGradient};

pub const LOCK_FILE: &str = ".preprocess.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessState {
    #[default]
    Idle,
    Running,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PreprocessStatus {
    pub state: PreprocessState,
    pub done_pairs: u64,
    pub total_pairs: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    /// Pairs for which the provider was called in this run.
    pub computed_pairs: u64,
    pub total_pairs: u64,
}

/// Exclusive advisory lock on the workspace, released on drop or process exit.
pub struct WorkspaceLock {
    _file: File,
}

impl WorkspaceLock {
    pub fn try_acquire(workspace: &Path) -> Result<Self> {
        std::fs::create_dir_all(workspace).map_err(|e| Error::io(workspace, e))?;
        let path = workspace.join(LOCK_FILE);
        let file = std::fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(WorkspaceLock { _file: file }),
            Err(std::fs::TryLockError::WouldBlock) => {
                Err(Error::Busy("preprocessing is already running for this workspace".into()))
            }
            Err(std::fs::TryLockError::Error(e)) => Err(Error::io(&path, e)),
        }
    }
}

fn staging_dir(root: &Path, checkpoint_id: u32) -> PathBuf {
    root.join("staging").join(format!("ckpt_{checkpoint_id}"))
}

fn shard_is_complete(path: &Path, meta: &CheckpointMeta, manifest: &GradientManifest) -> bool {
    match read_shard_header(path) {
        Ok(h) => {
            h.checkpoint_id == meta.checkpoint_id
                && h.n_examples == manifest.n_examples
                && h.dims == manifest.dims()
        }
        Err(_) => false,
    }
}

fn staged_is_valid(path: &Path, dims: &[u32]) -> bool {
    matches!(read_shard_header(path), Ok(h) if h.n_examples == 1 && h.dims == dims)
}

/// Number of (checkpoint, example) pairs whose final shard is missing or invalid.
pub fn missing_pairs(manifest_path: &Path) -> Result<u64> {
    let manifest = GradientManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new(""));
    Ok(manifest
        .checkpoints
        .iter()
        .filter(|c| !shard_is_complete(&root.join(&c.shard_path), c, &manifest))
        .count() as u64
        * u64::from(manifest.n_examples))
}

/// Run preprocessing. `status` is updated as pairs complete.
///
/// The caller must hold the [`WorkspaceLock`].
pub fn preprocess(
    manifest_path: &Path,
    n_corpus: usize,
    provider: &dyn GradientProvider,
    force: bool,
    status: &Mutex<PreprocessStatus>,
) -> Result<PreprocessReport> {
    let manifest = GradientManifest::load(manifest_path)?;
    if manifest.n_examples as usize != n_corpus {
        return Err(Error::Consistency(format!(
            "manifest lists {} examples but the corpus has {n_corpus}",
            manifest.n_examples
        )));
    }
    let root = manifest_path.parent().unwrap_or(Path::new("")).to_path_buf();
    let n = manifest.n_examples as usize;
    let dims = manifest.dims();
    let total = manifest.checkpoints.len() as u64 * n as u64;
    let set_status = |done: u64| {
        let mut s = status.lock().expect("status lock");
        s.state = PreprocessState::Running;
        s.done_pairs = done;
        s.total_pairs = total;
        s.message = None;
    };
    set_status(0);

    let mut done = 0u64;
    let mut computed = 0u64;
    for meta in &manifest.checkpoints {
        let final_path = root.join(&meta.shard_path);
        let staging = staging_dir(&root, meta.checkpoint_id);
        if force {
            let _ = std::fs::remove_dir_all(&staging);
        } else if shard_is_complete(&final_path, meta, &manifest) {
            done += n as u64;
            set_status(done);
            continue;
        }
        std::fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

        for example_id in 0..n {
            let staged = staging.join(format!("ex_{example_id}.gshd"));
            if !staged_is_valid(&staged, &dims) {
                let partial = staging.join(format!("ex_{example_id}.partial"));
                let request = ProviderRequest::Train {
                    checkpoint_id: meta.checkpoint_id,
                    example_id,
                    output_path: partial.clone(),
                };
                let written = provider.gradient(&request).map_err(|e| match e {
                    Error::Provider(m) => Error::Provider(format!(
                        "checkpoint {} example {example_id}: {m}",
                        meta.checkpoint_id
                    )),
                    other => Error::Provider(format!(
                        "checkpoint {} example {example_id}: {other}",
                        meta.checkpoint_id
                    )),
                })?;
                if !staged_is_valid(&written, &dims) {
                    let _ = std::fs::remove_file(&written);
                    return Err(Error::Provider(format!(
                        "checkpoint {} example {example_id}: provider output {} is not a \
                         single-example shard with dims {dims:?}",
                        meta.checkpoint_id,
                        written.display()
                    )));
                }
                std::fs::rename(&written, &staged).map_err(|e| Error::io(&staged, e))?;
                computed += 1;
            }
            done += 1;
            set_status(done);
        }

        let mut writer = ShardWriter::create(&final_path, meta.checkpoint_id, &dims, manifest.n_examples)?;
        for example_id in 0..n {
            let staged = staging.join(format!("ex_{example_id}.gshd"));
            let g = TestGradient::read(&staged, &dims)?;
            let layers: Vec<Vec<f32>> = g
                .layers
                .iter()
                .map(|l| l.iter().map(|&x| x as f32).collect())
                .collect();
            writer.push_example(&layers)?;
        }
        writer.finish()?;
        std::fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let staging_root = root.join("staging");
    if staging_root.is_dir() {
        let _ = std::fs::remove_dir(&staging_root);
    }
    {
        let mut s = status.lock().expect("status lock");
        s.state = PreprocessState::Idle;
        s.done_pairs = total;
        s.total_pairs = total;
    }
    Ok(PreprocessReport {
        computed_pairs: computed,
        total_pairs: total,
    })
}
