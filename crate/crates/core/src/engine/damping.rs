use crate::error::{Error, Result};
use crate::store::GradientStore;

pub const DEFAULT_ALPHA: f64 = 0.1;

/// Damping and squared gradient norms for one layer at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDamping {
    pub lambda: f64,
    pub sq_norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampingStats {
    pub checkpoint_id: u32,
    pub alpha: f64,
    pub n: usize,
    pub layers: Vec<LayerDamping>,
}

/// One streaming pass per layer collecting `‖g_i‖²`, then
/// `λ_l = alpha · Σ_i ‖g_i‖² / (n · d_l)`, or `alpha` if that is zero.
pub fn compute_damping(store: &GradientStore, checkpoint_id: u32, alpha: f64) -> Result<DampingStats> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    let n = store.n_examples();
    if n == 0 {
        return Err(Error::Precondition("store holds no examples".into()));
    }
    let mut layers = Vec::with_capacity(store.n_layers());
    for layer_id in 0..store.n_layers() {
        let dim = store.layer_dim(layer_id)?;
        let mut sq_norms = Vec::with_capacity(n);
        store.stream_layer(checkpoint_id, layer_id, |_, g| sq_norms.push(super::sq_norm(g)))?;
        let total: f64 = sq_norms.iter().sum();
        let mean_sq = total / (n as f64 * dim as f64);
        let lambda = if mean_sq > 0.0 { alpha * mean_sq } else { alpha };
        layers.push(LayerDamping { lambda, sq_norms });
    }
    Ok(DampingStats {
        checkpoint_id,
        alpha,
        n,
        layers,
    })
}
