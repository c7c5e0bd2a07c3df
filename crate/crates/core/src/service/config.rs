use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{DATAINF, DEFAULT_ALPHA, DEFAULT_BIN_COUNT, DEFAULT_K_DISPLAY, MAX_K_DISPLAY};
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";

/// How gradients are obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    /// External executable speaking the JSON-on-stdin protocol.
    Command { argv: Vec<String> },
    /// In-process toy model saved under `model_dir`.
    Toy { model_dir: PathBuf },
}

/// Scoring and display settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionConfig {
    pub method: String,
    pub k_display: usize,
    pub bin_count: usize,
    pub alpha: f64,
    /// 1 runs everything on the calling thread; any other value lets scoring
    /// use the rayon pool.
    pub workers: usize,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            method: DATAINF.to_string(),
            k_display: DEFAULT_K_DISPLAY,
            bin_count: DEFAULT_BIN_COUNT,
            alpha: DEFAULT_ALPHA,
            workers: 0,
        }
    }
}

impl AttributionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_K_DISPLAY).contains(&self.k_display) {
            return Err(Error::Range(format!(
                "k_display must be in 1..={MAX_K_DISPLAY}, got {}",
                self.k_display
            )));
        }
        if self.bin_count == 0 {
            return Err(Error::Range("bin_count must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Range(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Contents of `<workspace>/config.json`. Relative paths resolve against the
/// workspace directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceConfig {
    pub manifest: PathBuf,
    pub corpus: PathBuf,
    pub provider: ProviderSpec,
    #[serde(flatten)]
    pub attribution: AttributionConfig,
}

impl WorkspaceConfig {
    pub fn load(workspace: &Path) -> Result<Self> {
        let path = workspace.join(CONFIG_FILE);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("workspace config {}", path.display())),
            _ => Error::io(&path, e),
        })?;
        let cfg: WorkspaceConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Precondition(format!("{}: {e}", path.display())))?;
        cfg.attribution.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, workspace: &Path) -> Result<()> {
        std::fs::create_dir_all(workspace).map_err(|e| Error::io(workspace, e))?;
        let path = workspace.join(CONFIG_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn resolve(&self, workspace: &Path, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            workspace.join(path)
        }
    }
}
