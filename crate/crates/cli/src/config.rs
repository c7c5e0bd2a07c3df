use std::path::{Path, PathBuf};

use attributor_core::service::{AttributionConfig, ProviderSpec, WorkspaceConfig, CONFIG_FILE};
use attributor_core::{Error, Result};
use clap::Args;

/// Settings that may come from flags; each overrides the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigFlags {
    /// Gradient manifest (relative paths resolve against the workspace).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Training corpus, JSON lines.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Provider command line, split on whitespace.
    #[arg(long = "provider-cmd", global = true)]
    pub provider_cmd: Option<String>,
    /// Scoring method id.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Damping multiplier.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Entries shown per side, 1 to 10.
    #[arg(long = "k-display", global = true)]
    pub k_display: Option<usize>,
    /// Histogram bins.
    #[arg(long = "bin-count", global = true)]
    pub bin_count: Option<usize>,
    /// Scoring threads; 1 runs on the calling thread.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

/// Effective configuration: flags, then `config.json`, then defaults.
pub fn resolve(workspace: &Path, flags: &ConfigFlags) -> Result<WorkspaceConfig> {
    let file = if workspace.join(CONFIG_FILE).is_file() {
        Some(WorkspaceConfig::load(workspace)?)
    } else {
        None
    };
    merge(file, flags, workspace)
}

pub fn merge(file: Option<WorkspaceConfig>, flags: &ConfigFlags, workspace: &Path) -> Result<WorkspaceConfig> {
    let provider = flags.provider_cmd.as_deref().map(|cmd| ProviderSpec::Command {
        argv: cmd.split_whitespace().map(str::to_string).collect(),
    });
    let mut config = match file {
        Some(mut c) => {
            if let Some(m) = &flags.manifest {
                c.manifest = m.clone();
            }
            if let Some(p) = &flags.corpus {
                c.corpus = p.clone();
            }
            if let Some(p) = provider {
                c.provider = p;
            }
            c
        }
        None => match (&flags.manifest, &flags.corpus, provider) {
            (Some(manifest), Some(corpus), Some(provider)) => WorkspaceConfig {
                manifest: manifest.clone(),
                corpus: corpus.clone(),
                provider,
                attribution: AttributionConfig::default(),
            },
            _ => {
                return Err(Error::Precondition(format!(
                    "no {CONFIG_FILE} in {}; pass --manifest, --corpus and --provider-cmd",
                    workspace.display()
                )))
            }
        },
    };
    apply_attribution(flags, &mut config.attribution);
    config.attribution.validate()?;
    if let ProviderSpec::Command { argv } = &config.provider {
        if argv.is_empty() {
            return Err(Error::Precondition("provider command is empty".into()));
        }
    }
    Ok(config)
}

/// Overwrite the scoring settings given on the command line.
pub fn apply_attribution(flags: &ConfigFlags, a: &mut AttributionConfig) {
    if let Some(m) = &flags.method {
        a.method = m.clone();
    }
    if let Some(x) = flags.alpha {
        a.alpha = x;
    }
    if let Some(k) = flags.k_display {
        a.k_display = k;
    }
    if let Some(b) = flags.bin_count {
        a.bin_count = b;
    }
    if let Some(w) = flags.workers {
        a.workers = w;
    }
}

/// Fail early when the configured inputs are missing.
pub fn check_paths(workspace: &Path, config: &WorkspaceConfig) -> Result<()> {
    for (what, path) in [("manifest", &config.manifest), ("corpus", &config.corpus)] {
        let full = config.resolve(workspace, path);
        if !full.is_file() {
            return Err(Error::NotFound(format!("{what} {}", full.display())));
        }
    }
    Ok(())
}
