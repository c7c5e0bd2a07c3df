//! Influence kernels and the summaries built on top of them.
//!
//! All arithmetic accumulates in binary64 over binary32 stored gradients.
//! Within a layer, sums run in example-id order on one thread; across layers
//! the per-layer contributions are added in layer-id order. Parallel and
//! sequential runs therefore agree bit for bit.

mod aggregate;
mod damping;
mod datainf;
mod histogram;
mod method;
mod rank;
mod tracin;

pub use aggregate::{aggregate_median, InfluenceScores};
pub use damping::{compute_damping, DampingStats, LayerDamping, DEFAULT_ALPHA};
pub use datainf::{datainf_scores, ihvp_datainf};
pub use histogram::{histogram, shared_edges, ScoreHistogram, DEFAULT_BIN_COUNT};
pub use method::{
    score_checkpoints, DataInf, FnMethod, MethodRegistry, ScoringMethod, ScoringRequest, TracIn,
    DATAINF, TRACIN,
};
pub use rank::{rank_points, Ranking, DEFAULT_K_DISPLAY, MAX_K_DISPLAY};
pub use tracin::tracin_scores;

pub(crate) fn dot(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| x * f64::from(y)).sum()
}

pub(crate) fn sq_norm(g: &[f32]) -> f64 {
    g.iter().map(|&x| f64::from(x) * f64::from(x)).sum()
}
