use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{positions, Position, ToyModel, Vocabulary, DEFAULT_WINDOW};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::store::CheckpointMeta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub seed: u64,
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            learning_rate: 0.1,
            seed: 0,
            window: DEFAULT_WINDOW,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Shuffle seed for `epoch`, derived from the run seed.
pub fn epoch_seed(seed: u64, epoch: u32) -> u64 {
    splitmix64(seed ^ splitmix64(u64::from(epoch) + 1))
}

pub fn epoch_permutation(seed: u64, epoch: u32, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(seed, epoch));
    order.shuffle(&mut rng);
    order
}

/// Training documents as prediction positions, one list per document.
#[derive(Debug, Clone)]
pub struct TokenizedCorpus {
    pub docs: Vec<Vec<Position>>,
}

impl TokenizedCorpus {
    pub fn new(corpus: &Corpus, vocab: &Vocabulary, window: usize) -> Self {
        let docs = corpus
            .docs()
            .iter()
            .map(|d| positions(vocab, &[], &vocab.encode(&d.text), window))
            .collect();
        TokenizedCorpus { docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// A finished run: one checkpoint per epoch, taken after that epoch's pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub permutations: Vec<Vec<usize>>,
    pub checkpoints: Vec<ToyModel>,
    /// Mean per-document loss over the full corpus at each checkpoint.
    pub epoch_losses: Vec<f64>,
}

impl TrainRun {
    pub fn final_model(&self) -> &ToyModel {
        self.checkpoints.last().expect("at least one epoch")
    }

    pub fn checkpoint_metas(&self) -> Vec<CheckpointMeta> {
        (0..self.config.epochs)
            .map(|e| CheckpointMeta {
                checkpoint_id: e,
                epoch: e,
                learning_rate: self.config.learning_rate,
                shuffle_seed: epoch_seed(self.config.seed, e),
                shard_path: format!("ckpt_{e}.gshd").into(),
            })
            .collect()
    }
}

pub fn train(corpus: &Corpus, vocab: &Vocabulary, config: TrainConfig) -> Result<TrainRun> {
    let tokenized = TokenizedCorpus::new(corpus, vocab, config.window);
    train_tokenized(&tokenized, vocab.len(), config, None)
}

/// SGD with one document per step over a fresh permutation each epoch.
/// `exclude` skips one document while keeping every permutation unchanged.
pub fn train_tokenized(
    corpus: &TokenizedCorpus,
    vocab_size: usize,
    config: TrainConfig,
    exclude: Option<usize>,
) -> Result<TrainRun> {
    if corpus.is_empty() {
        return Err(Error::Precondition("cannot train on an empty corpus".into()));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::Precondition("learning rate must be positive".into()));
    }
    if config.epochs == 0 {
        return Err(Error::Precondition("need at least one epoch".into()));
    }
    let n = corpus.len();
    let mut model = ToyModel::zeros(vocab_size);
    let mut permutations = Vec::with_capacity(config.epochs as usize);
    let mut checkpoints = Vec::with_capacity(config.epochs as usize);
    let mut epoch_losses = Vec::with_capacity(config.epochs as usize);
    for epoch in 0..config.epochs {
        let order = epoch_permutation(config.seed, epoch, n);
        for &i in &order {
            if Some(i) == exclude {
                continue;
            }
            let (loss, grad) = model.loss_and_grad(&corpus.docs[i]);
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "loss diverged at epoch {epoch}, example {i}"
                )));
            }
            model.sgd_step(&grad, config.learning_rate);
        }
        let mean = corpus.docs.iter().map(|d| model.loss(d)).sum::<f64>() / n as f64;
        if !mean.is_finite() {
            return Err(Error::Training(format!("loss diverged after epoch {epoch}")));
        }
        epoch_losses.push(mean);
        permutations.push(order);
        checkpoints.push(model.clone());
    }
    Ok(TrainRun {
        config,
        permutations,
        checkpoints,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_reproducible() {
        assert_eq!(epoch_permutation(7, 2, 50), epoch_permutation(7, 2, 50));
        assert_ne!(epoch_permutation(7, 1, 50), epoch_permutation(7, 2, 50));
        let mut p = epoch_permutation(7, 0, 50);
        p.sort();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let corpus = Corpus::from_texts(
            ["storm rain storm", "rain storm rain"]
                .iter()
                .map(|t| (t.to_string(), Default::default())),
        )
        .unwrap();
        let vocab = Vocabulary::from_texts(corpus.docs().iter().map(|d| d.text.as_str()));
        let cfg = TrainConfig {
            learning_rate: 1e308,
            ..Default::default()
        };
        assert!(matches!(train(&corpus, &vocab, cfg), Err(Error::Training(_))));
    }
}
