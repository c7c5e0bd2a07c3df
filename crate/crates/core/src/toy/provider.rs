use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{positions, ToyModel, Vocabulary};
use super::train::{TokenizedCorpus, TrainRun};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::service::{GradientProvider, ProviderRequest};
use crate::store::{LayerSpec, TestGradient};

const META_FILE: &str = "toy.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ToyMeta {
    window: usize,
    vocabulary: Vocabulary,
    checkpoint_ids: Vec<u32>,
}

/// Reference gradient provider over toy-model checkpoints.
///
/// Gradients are a single layer: `∂loss/∂W` flattened row-major, `|V|²` values.
#[derive(Debug, Clone)]
pub struct ToyProvider {
    vocab: Vocabulary,
    window: usize,
    corpus: TokenizedCorpus,
    checkpoints: BTreeMap<u32, ToyModel>,
}

impl ToyProvider {
    pub fn new(vocab: Vocabulary, window: usize, corpus: &Corpus, run: &TrainRun) -> Self {
        let checkpoints = run
            .checkpoints
            .iter()
            .enumerate()
            .map(|(i, m)| (i as u32, m.clone()))
            .collect();
        ToyProvider {
            corpus: TokenizedCorpus::new(corpus, &vocab, window),
            vocab,
            window,
            checkpoints,
        }
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let v = self.vocab.len() as u32;
        vec![LayerSpec {
            layer_id: 0,
            dim: v * v,
        }]
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn checkpoint(&self, checkpoint_id: u32) -> Result<&ToyModel> {
        self.checkpoints
            .get(&checkpoint_id)
            .ok_or_else(|| Error::Provider(format!("unknown checkpoint {checkpoint_id}")))
    }

    /// Gradient of training example `example_id`'s summed loss.
    pub fn train_gradient(&self, checkpoint_id: u32, example_id: usize) -> Result<Vec<f64>> {
        let model = self.checkpoint(checkpoint_id)?;
        let doc = self.corpus.docs.get(example_id).ok_or_else(|| {
            Error::Provider(format!(
                "example {example_id} out of range (n = {})",
                self.corpus.len()
            ))
        })?;
        Ok(model.loss_and_grad(doc).1)
    }

    /// Gradient of the loss restricted to `token_indices` of `text`, each
    /// position conditioned on the prompt and all preceding tokens.
    pub fn test_gradient(
        &self,
        checkpoint_id: u32,
        prompt: &str,
        text: &str,
        token_indices: &[usize],
    ) -> Result<Vec<f64>> {
        let model = self.checkpoint(checkpoint_id)?;
        let selected = self.test_positions(prompt, text, token_indices)?;
        Ok(model.loss_and_grad(&selected).1)
    }

    /// Loss restricted to `token_indices`, at the given weights.
    pub fn test_loss(&self, model: &ToyModel, prompt: &str, text: &str, token_indices: &[usize]) -> Result<f64> {
        Ok(model.loss(&self.test_positions(prompt, text, token_indices)?))
    }

    fn test_positions(
        &self,
        prompt: &str,
        text: &str,
        token_indices: &[usize],
    ) -> Result<Vec<super::model::Position>> {
        let all = positions(
            &self.vocab,
            &self.vocab.encode(prompt),
            &self.vocab.encode(text),
            self.window,
        );
        token_indices
            .iter()
            .map(|&i| {
                all.get(i).cloned().ok_or_else(|| {
                    Error::Provider(format!("token index {i} out of range ({} tokens)", all.len()))
                })
            })
            .collect()
    }

    /// Persist vocabulary and checkpoint weights under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = ToyMeta {
            window: self.window,
            vocabulary: self.vocab.clone(),
            checkpoint_ids: self.checkpoints.keys().copied().collect(),
        };
        let path = dir.join(META_FILE);
        std::fs::write(&path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;
        for (id, model) in &self.checkpoints {
            let path = dir.join(format!("weights_{id}.f64le"));
            let mut file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut bytes = Vec::with_capacity(8 * model.weights.len());
            for w in &model.weights {
                bytes.extend_from_slice(&w.to_le_bytes());
            }
            file.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, corpus: &Corpus) -> Result<Self> {
        let path = dir.join(META_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let meta: ToyMeta = serde_json::from_slice(&bytes)?;
        let vocab = meta.vocabulary.reindexed();
        let v = vocab.len();
        let mut checkpoints = BTreeMap::new();
        for id in meta.checkpoint_ids {
            let path = dir.join(format!("weights_{id}.f64le"));
            let mut bytes = Vec::new();
            std::fs::File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::io(&path, e))?;
            if bytes.len() != 8 * v * v {
                return Err(Error::Format(format!(
                    "{} holds {} bytes, expected {}",
                    path.display(),
                    bytes.len(),
                    8 * v * v
                )));
            }
            let weights = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            checkpoints.insert(id, ToyModel { vocab_size: v, weights });
        }
        Ok(ToyProvider {
            corpus: TokenizedCorpus::new(corpus, &vocab, meta.window),
            vocab,
            window: meta.window,
            checkpoints,
        })
    }
}

impl GradientProvider for ToyProvider {
    fn gradient(&self, request: &ProviderRequest) -> Result<PathBuf> {
        let grad = match request {
            ProviderRequest::Train {
                checkpoint_id,
                example_id,
                ..
            } => self.train_gradient(*checkpoint_id, *example_id)?,
            ProviderRequest::Test {
                checkpoint_id,
                prompt,
                text,
                token_indices,
                ..
            } => self.test_gradient(*checkpoint_id, prompt, text, token_indices)?,
        };
        TestGradient::new(vec![grad]).write(request.output_path(), request.checkpoint_id())
    }
}
