use super::damping::DampingStats;
use super::dot;
use crate::error::{Error, Result};
use crate::parallel::{self, Parallelism};
use crate::store::{GradientStore, TestGradient};

/// Closed-form inverse-Hessian-vector product for one layer.
///
/// The layer Hessian is approximated by the average of damped rank-one terms
/// `λI + g_i g_iᵀ`, and each term is inverted exactly (Sherman–Morrison):
///
/// ```text
/// r = (1/λ) · ( v − (1/n) Σ_i c_i g_i ),   c_i = g_iᵀv / (λ + ‖g_i‖²)
/// ```
///
/// One streaming pass over the layer.
pub fn ihvp_datainf(
    v: &[f64],
    store: &GradientStore,
    checkpoint_id: u32,
    layer_id: usize,
    stats: &DampingStats,
) -> Result<Vec<f64>> {
    let dim = store.layer_dim(layer_id)?;
    if v.len() != dim {
        return Err(Error::Shape(format!(
            "layer {layer_id}: vector has length {}, layer dim is {dim}",
            v.len()
        )));
    }
    if stats.checkpoint_id != checkpoint_id {
        return Err(Error::Precondition(format!(
            "damping stats are for checkpoint {}, not {checkpoint_id}",
            stats.checkpoint_id
        )));
    }
    let layer = stats
        .layers
        .get(layer_id)
        .ok_or_else(|| Error::Range(format!("no damping stats for layer {layer_id}")))?;
    let lambda = layer.lambda;
    let n = store.n_examples();
    if layer.sq_norms.len() != n {
        return Err(Error::Precondition("damping stats were computed for another store".into()));
    }

    let mut acc = vec![0.0f64; dim];
    store.stream_layer(checkpoint_id, layer_id, |i, g| {
        let c = dot(v, g) / (lambda + layer.sq_norms[i]);
        for (a, &x) in acc.iter_mut().zip(g) {
            *a += c * f64::from(x);
        }
    })?;
    let inv_n = 1.0 / n as f64;
    Ok(v
        .iter()
        .zip(&acc)
        .map(|(vi, ai)| (vi - ai * inv_n) / lambda)
        .collect())
}

/// Per-example scores `s_k = Σ_l r_lᵀ g_{l,k}` at one checkpoint.
///
/// Positive scores mean upweighting example k lowers the test loss. Two
/// streaming passes per layer; layers may be processed concurrently.
pub fn datainf_scores(
    store: &GradientStore,
    checkpoint_id: u32,
    test_gradient: &TestGradient,
    stats: &DampingStats,
    mode: Parallelism,
) -> Result<Vec<f64>> {
    check_test_gradient(store, test_gradient)?;
    let n = store.n_examples();
    let layer_ids: Vec<usize> = (0..store.n_layers()).collect();
    let per_layer = parallel::try_map(mode, layer_ids, |layer_id| {
        let r = ihvp_datainf(&test_gradient.layers[layer_id], store, checkpoint_id, layer_id, stats)?;
        let mut s = vec![0.0f64; n];
        store.stream_layer(checkpoint_id, layer_id, |k, g| s[k] = dot(&r, g))?;
        Ok::<_, Error>(s)
    })?;
    Ok(sum_layers(n, per_layer))
}

pub(crate) fn check_test_gradient(store: &GradientStore, tg: &TestGradient) -> Result<()> {
    let dims = store.manifest().dims();
    if tg.dims() != dims {
        return Err(Error::Shape(format!(
            "test gradient dims {:?} do not match manifest {dims:?}",
            tg.dims()
        )));
    }
    Ok(())
}

pub(crate) fn sum_layers(n: usize, per_layer: Vec<Vec<f64>>) -> Vec<f64> {
    let mut total = vec![0.0f64; n];
    for layer in per_layer {
        for (t, s) in total.iter_mut().zip(layer) {
            *t += s;
        }
    }
    total
}
