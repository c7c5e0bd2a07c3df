use std::path::Path;

use super::model::Vocabulary;
use super::provider::ToyProvider;
use super::train::{train, TrainConfig, TrainRun};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::service::{AttributionConfig, ProviderSpec, WorkspaceConfig};
use crate::store::GradientManifest;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const MODEL_DIR: &str = "model";
pub const MANIFEST_FILE: &str = "store/manifest.json";

/// Train the toy model on `corpus` and lay out a workspace around it: the
/// corpus, the saved model, a manifest whose shards are not yet computed,
/// and a config that uses the in-process toy provider.
pub fn init_workspace(
    workspace: &Path,
    corpus: &Corpus,
    vocab: Vocabulary,
    train_config: TrainConfig,
    attribution: AttributionConfig,
) -> Result<(WorkspaceConfig, TrainRun)> {
    std::fs::create_dir_all(workspace.join("store")).map_err(|e| Error::io(workspace, e))?;
    corpus.save(&workspace.join(CORPUS_FILE))?;
    let run = train(corpus, &vocab, train_config)?;
    let provider = ToyProvider::new(vocab, train_config.window, corpus, &run);
    provider.save(&workspace.join(MODEL_DIR))?;
    let manifest = GradientManifest::new(corpus.len() as u32, provider.layers(), run.checkpoint_metas());
    manifest.save(&workspace.join(MANIFEST_FILE))?;
    let config = WorkspaceConfig {
        manifest: MANIFEST_FILE.into(),
        corpus: CORPUS_FILE.into(),
        provider: ProviderSpec::Toy { model_dir: MODEL_DIR.into() },
        attribution,
    };
    config.save(workspace)?;
    Ok((config, run))
}
