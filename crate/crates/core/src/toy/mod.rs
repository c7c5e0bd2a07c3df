//! Desk-scale stand-in for a fine-tuned language model.
//!
//! A convex softmax-regression next-word model, trained with SGD over a fresh
//! shuffle each epoch and checkpointed after every epoch. The reference
//! [`ToyProvider`] serves its gradients through the provider contract, and
//! [`oracle`] holds independent re-computations used to check the engine.

mod model;
pub mod oracle;
mod provider;
pub mod scenario;
mod train;
mod workspace;

pub use model::{normalize, positions, Position, ToyModel, Vocabulary, BOS, DEFAULT_WINDOW, UNK};
pub use provider::ToyProvider;
pub use train::{
    epoch_permutation, epoch_seed, train, train_tokenized, TokenizedCorpus, TrainConfig, TrainRun,
};
pub use workspace::{init_workspace, CORPUS_FILE, MANIFEST_FILE, MODEL_DIR};
