//! Independent reference computations.
//!
//! Nothing here calls into the engine's kernels: the closed-form scores are
//! re-evaluated with explicit dense matrices, and ground-truth influence comes
//! from actually retraining without each example.

use nalgebra::{DMatrix, DVector};

use super::model::ToyModel;
use super::train::{train_tokenized, TokenizedCorpus, TrainConfig};
use crate::error::{Error, Result};
use crate::parallel::{self, Parallelism};

/// Dense evaluation of the per-layer Sherman–Morrison scores.
///
/// `gradients[i][l]` is layer `l` of example `i`; `v[l]` is the test gradient.
/// Each term `(1/λ)(I − g gᵀ/(λ + ‖g‖²))` is materialised as a `d×d` matrix.
pub fn dense_datainf_oracle(gradients: &[Vec<Vec<f64>>], v: &[Vec<f64>], alpha: f64) -> Vec<f64> {
    let n = gradients.len();
    let mut scores = vec![0.0; n];
    for (l, v_l) in v.iter().enumerate() {
        let d = v_l.len();
        let g = DMatrix::from_fn(n, d, |i, j| gradients[i][l][j]);
        let mean_sq = g.iter().map(|x| x * x).sum::<f64>() / (n * d) as f64;
        let lambda = if mean_sq > 0.0 { alpha * mean_sq } else { alpha };
        let mut h_inv = DMatrix::<f64>::zeros(d, d);
        for i in 0..n {
            let gi = g.row(i).transpose();
            let denom = lambda + gi.norm_squared();
            let term = (DMatrix::<f64>::identity(d, d) - &gi * gi.transpose() / denom) / lambda;
            h_inv += term;
        }
        h_inv /= n as f64;
        let r = &h_inv * DVector::from_column_slice(v_l);
        let s = &g * r;
        for (acc, x) in scores.iter_mut().zip(s.iter()) {
            *acc += x;
        }
    }
    scores
}

/// `(λI + g gᵀ)⁻¹ v` by LU factorisation.
pub fn dense_damped_inverse(g: &[f64], v: &[f64], lambda: f64) -> Vec<f64> {
    let d = g.len();
    let gv = DVector::from_column_slice(g);
    let m = DMatrix::<f64>::identity(d, d) * lambda + &gv * gv.transpose();
    m.lu()
        .solve(&DVector::from_column_slice(v))
        .expect("damped matrix is invertible")
        .iter()
        .copied()
        .collect()
}

/// `η · Σ_l v_lᵀ g_{l,k}` by explicit loops.
pub fn brute_force_tracin(gradients: &[Vec<Vec<f64>>], v: &[Vec<f64>], eta: f64) -> Vec<f64> {
    gradients
        .iter()
        .map(|layers| {
            let mut total = 0.0;
            for (g_l, v_l) in layers.iter().zip(v) {
                for j in 0..g_l.len() {
                    total += g_l[j] * v_l[j];
                }
            }
            eta * total
        })
        .collect()
}

/// Leave-one-out ground truth: `Δloss_k = L(θ₋ₖ) − L(θ)`, where `θ₋ₖ` is
/// trained with the same schedule and permutations but example k skipped.
/// `test_loss` evaluates the query on the final weights.
pub fn loo_oracle<F>(
    corpus: &TokenizedCorpus,
    vocab_size: usize,
    config: TrainConfig,
    test_loss: F,
    mode: Parallelism,
) -> Result<Vec<f64>>
where
    F: Fn(&ToyModel) -> f64 + Sync + Send,
{
    if corpus.len() > 200 {
        return Err(Error::Precondition(format!(
            "leave-one-out retrains n + 1 times; n = {} exceeds 200",
            corpus.len()
        )));
    }
    let full = train_tokenized(corpus, vocab_size, config, None)?;
    let base = test_loss(full.final_model());
    let ids: Vec<usize> = (0..corpus.len()).collect();
    parallel::try_map(mode, ids, |k| {
        let run = train_tokenized(corpus, vocab_size, config, Some(k))?;
        Ok(test_loss(run.final_model()) - base)
    })
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs equal-length inputs");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va * vb).sqrt()
}
