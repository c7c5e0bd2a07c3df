use super::datainf::{check_test_gradient, sum_layers};
use super::dot;
use crate::error::{Error, Result};
use crate::parallel::{self, Parallelism};
use crate::store::{GradientStore, TestGradient};

/// `s_k = η · Σ_l v_lᵀ g_{l,k}`, one streaming pass per layer.
pub fn tracin_scores(
    store: &GradientStore,
    checkpoint_id: u32,
    test_gradient: &TestGradient,
    eta: f64,
    mode: Parallelism,
) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Precondition(format!("learning rate must be positive, got {eta}")));
    }
    check_test_gradient(store, test_gradient)?;
    let n = store.n_examples();
    let layer_ids: Vec<usize> = (0..store.n_layers()).collect();
    let per_layer = parallel::try_map(mode, layer_ids, |layer_id| {
        let v = &test_gradient.layers[layer_id];
        let mut s = vec![0.0f64; n];
        store.stream_layer(checkpoint_id, layer_id, |k, g| s[k] = eta * dot(v, g))?;
        Ok::<_, Error>(s)
    })?;
    Ok(sum_layers(n, per_layer))
}
