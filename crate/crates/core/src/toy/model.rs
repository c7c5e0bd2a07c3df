use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const DEFAULT_WINDOW: usize = 3;

/// Lowercase and strip surrounding punctuation (inner hyphens and
/// apostrophes survive).
pub fn normalize(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Word list with `<unk>` at 0 and `<s>` at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut list = vec![UNK.to_string(), BOS.to_string()];
        let mut extra: Vec<String> = words
            .into_iter()
            .map(|w| normalize(w.as_ref()))
            .filter(|w| !w.is_empty() && w != UNK && w != BOS)
            .collect();
        extra.sort();
        extra.dedup();
        list.extend(extra);
        Self::from_list(list)
    }

    /// Vocabulary over every word of the given texts.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        Self::new(texts.into_iter().flat_map(str::split_whitespace))
    }

    fn from_list(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index }
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindexed(self) -> Self {
        Self::from_list(self.words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(&normalize(word)).copied().unwrap_or(0)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }

    pub fn bos(&self) -> usize {
        1
    }
}

/// One prediction: the context word ids and the target word id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Position {
    pub context: Vec<usize>,
    pub target: usize,
}

/// Positions for predicting every word of `words` after `prefix`, using at
/// most `window` preceding ids as context. The sequence starts with `<s>`.
pub fn positions(vocab: &Vocabulary, prefix: &[usize], words: &[usize], window: usize) -> Vec<Position> {
    let mut history: Vec<usize> = Vec::with_capacity(1 + prefix.len() + words.len());
    history.push(vocab.bos());
    history.extend_from_slice(prefix);
    let mut out = Vec::with_capacity(words.len());
    for &w in words {
        let start = history.len().saturating_sub(window);
        out.push(Position {
            context: history[start..].to_vec(),
            target: w,
        });
        history.push(w);
    }
    out
}

/// Softmax-regression next-word model: `p = softmax(W x)` with `x` the mean
/// one-hot of the context words. `W` is `|V|×|V|`, row-major by output word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub vocab_size: usize,
    pub weights: Vec<f64>,
}

impl ToyModel {
    pub fn zeros(vocab_size: usize) -> Self {
        ToyModel {
            vocab_size,
            weights: vec![0.0; vocab_size * vocab_size],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len()
    }

    /// Sparse context features as `(word id, weight)` pairs.
    pub fn features(context: &[usize]) -> Vec<(usize, f64)> {
        if context.is_empty() {
            return Vec::new();
        }
        let w = 1.0 / context.len() as f64;
        let mut feats: Vec<(usize, f64)> = Vec::with_capacity(context.len());
        for &c in context {
            match feats.iter_mut().find(|(id, _)| *id == c) {
                Some(f) => f.1 += w,
                None => feats.push((c, w)),
            }
        }
        feats.sort_by_key(|f| f.0);
        feats
    }

    pub fn probabilities(&self, feats: &[(usize, f64)]) -> Vec<f64> {
        let v = self.vocab_size;
        let mut logits = vec![0.0f64; v];
        for (j, logit) in logits.iter_mut().enumerate() {
            let row = &self.weights[j * v..(j + 1) * v];
            *logit = feats.iter().map(|&(m, x)| row[m] * x).sum();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        for l in logits.iter_mut() {
            *l /= total;
        }
        logits
    }

    /// Summed cross-entropy over `positions`.
    pub fn loss(&self, positions: &[Position]) -> f64 {
        positions
            .iter()
            .map(|p| {
                let probs = self.probabilities(&Self::features(&p.context));
                -probs[p.target].ln()
            })
            .sum()
    }

    /// Summed loss and its gradient `Σ (p − e_y) ⊗ x`, flattened row-major.
    pub fn loss_and_grad(&self, positions: &[Position]) -> (f64, Vec<f64>) {
        let v = self.vocab_size;
        let mut grad = vec![0.0f64; v * v];
        let mut loss = 0.0;
        for p in positions {
            let feats = Self::features(&p.context);
            let mut probs = self.probabilities(&feats);
            loss -= probs[p.target].ln();
            probs[p.target] -= 1.0;
            for (j, &delta) in probs.iter().enumerate() {
                let row = &mut grad[j * v..(j + 1) * v];
                for &(m, x) in &feats {
                    row[m] += delta * x;
                }
            }
        }
        (loss, grad)
    }

    pub fn sgd_step(&mut self, grad: &[f64], lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(grad) {
            *w -= lr * g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(["storm", "rain", "wind"])
    }

    #[test]
    fn vocabulary_layout() {
        let v = vocab();
        assert_eq!(v.words(), &["<unk>", "<s>", "rain", "storm", "wind"]);
        assert_eq!(v.id("Storm,"), 3);
        assert_eq!(v.id("hail"), 0);
    }

    #[test]
    fn positions_use_window() {
        let v = vocab();
        let ps = positions(&v, &[2], &[3, 4, 2], 2);
        assert_eq!(ps[0].context, vec![1, 2]);
        assert_eq!(ps[1].context, vec![2, 3]);
        assert_eq!(ps[2].context, vec![3, 4]);
        assert_eq!(ps[2].target, 2);
    }

    #[test]
    fn zero_model_gradient_closed_form() {
        let v = vocab();
        let model = ToyModel::zeros(v.len());
        let ps = positions(&v, &[], &[3], 3);
        let (loss, grad) = model.loss_and_grad(&ps);
        let n = v.len();
        assert!((loss - (n as f64).ln()).abs() < 1e-12);
        // context is just <s>: x = e_1
        for j in 0..n {
            for m in 0..n {
                let expected = if m == 1 {
                    1.0 / n as f64 - if j == 3 { 1.0 } else { 0.0 }
                } else {
                    0.0
                };
                assert!((grad[j * n + m] - expected).abs() < 1e-15);
            }
        }
    }
}
