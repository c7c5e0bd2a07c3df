#![allow(dead_code)]

use std::path::Path;

use attributor_core::store::{write_shard, CheckpointMeta, GradientManifest, GradientStore, LayerSpec, TestGradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// gradients[checkpoint][example][layer], already rounded through f32.
pub type Grads = Vec<Vec<Vec<Vec<f64>>>>;

pub struct RandomStore {
    pub store: GradientStore,
    pub grads: Grads,
    pub dims: Vec<u32>,
    pub learning_rates: Vec<f64>,
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| f64::from((rng.gen_range(-1.0..1.0) * scale) as f32)).collect()
}

pub fn build_store(dir: &Path, seed: u64, n: usize, dims: &[u32], n_ckpt: usize) -> RandomStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grads = Vec::new();
    let mut metas = Vec::new();
    let mut learning_rates = Vec::new();
    for c in 0..n_ckpt {
        let scale = rng.gen_range(0.1..3.0);
        let g: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|_| dims.iter().map(|&d| random_vec(&mut rng, d as usize, scale)).collect())
            .collect();
        let g32: Vec<Vec<Vec<f32>>> = g
            .iter()
            .map(|ex| ex.iter().map(|l| l.iter().map(|&x| x as f32).collect()).collect())
            .collect();
        let name = format!("ckpt_{c}.gshd");
        write_shard(&dir.join(&name), c as u32, dims, &g32).unwrap();
        let lr = rng.gen_range(0.01..0.5);
        learning_rates.push(lr);
        metas.push(CheckpointMeta {
            checkpoint_id: c as u32,
            epoch: c as u32,
            learning_rate: lr,
            shuffle_seed: seed + c as u64,
            shard_path: name.into(),
        });
        grads.push(g);
    }
    let layers = dims
        .iter()
        .enumerate()
        .map(|(i, &dim)| LayerSpec { layer_id: i as u32, dim })
        .collect();
    let manifest = GradientManifest::new(n as u32, layers, metas);
    let path = dir.join("manifest.json");
    manifest.save(&path).unwrap();
    RandomStore {
        store: GradientStore::open(&path).unwrap(),
        grads,
        dims: dims.to_vec(),
        learning_rates,
    }
}

pub fn random_test_gradient(rng: &mut ChaCha8Rng, dims: &[u32]) -> TestGradient {
    TestGradient::new(dims.iter().map(|&d| random_vec(rng, d as usize, 1.0)).collect())
}

/// ‖a − b‖∞ / ‖b‖∞.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
