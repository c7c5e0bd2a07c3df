use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::aggregate::InfluenceScores;
use super::damping::compute_damping;
use super::datainf::datainf_scores;
use super::tracin::tracin_scores;
use crate::error::{Error, Result};
use crate::parallel::{self, Parallelism};
use crate::store::{CheckpointMeta, GradientStore, TestGradient};

pub const DATAINF: &str = "datainf";
pub const TRACIN: &str = "tracin";

/// Everything a scoring method may look at for one checkpoint.
pub struct ScoringRequest<'a> {
    pub store: &'a GradientStore,
    pub checkpoint: &'a CheckpointMeta,
    pub test_gradient: &'a TestGradient,
    pub alpha: f64,
    pub parallelism: Parallelism,
}

/// A training-data attribution method: n scores for one checkpoint.
pub trait ScoringMethod: Send + Sync {
    fn id(&self) -> &str;
    fn score(&self, request: &ScoringRequest<'_>) -> Result<Vec<f64>>;
}

pub struct DataInf;

impl ScoringMethod for DataInf {
    fn id(&self) -> &str {
        DATAINF
    }

    fn score(&self, req: &ScoringRequest<'_>) -> Result<Vec<f64>> {
        let id = req.checkpoint.checkpoint_id;
        let stats = compute_damping(req.store, id, req.alpha)?;
        datainf_scores(req.store, id, req.test_gradient, &stats, req.parallelism)
    }
}

pub struct TracIn;

impl ScoringMethod for TracIn {
    fn id(&self) -> &str {
        TRACIN
    }

    fn score(&self, req: &ScoringRequest<'_>) -> Result<Vec<f64>> {
        tracin_scores(
            req.store,
            req.checkpoint.checkpoint_id,
            req.test_gradient,
            req.checkpoint.learning_rate,
            req.parallelism,
        )
    }
}

/// Adapter turning a plain function into a [`ScoringMethod`].
pub struct FnMethod<F> {
    id: String,
    f: F,
}

impl<F> FnMethod<F>
where
    F: Fn(&ScoringRequest<'_>) -> Result<Vec<f64>> + Send + Sync,
{
    pub fn new(id: impl Into<String>, f: F) -> Self {
        FnMethod { id: id.into(), f }
    }
}

impl<F> ScoringMethod for FnMethod<F>
where
    F: Fn(&ScoringRequest<'_>) -> Result<Vec<f64>> + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, request: &ScoringRequest<'_>) -> Result<Vec<f64>> {
        (self.f)(request)
    }
}

#[derive(Clone)]
pub struct MethodRegistry {
    methods: HashMap<String, Arc<dyn ScoringMethod>>,
}

impl Default for MethodRegistry {
    fn default() -> Self {
        let mut r = MethodRegistry {
            methods: HashMap::new(),
        };
        r.register(DataInf);
        r.register(TracIn);
        r
    }
}

impl MethodRegistry {
    pub fn register(&mut self, method: impl ScoringMethod + 'static) {
        self.methods.insert(method.id().to_string(), Arc::new(method));
    }

    pub fn register_fn<F>(&mut self, id: &str, f: F)
    where
        F: Fn(&ScoringRequest<'_>) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        self.register(FnMethod::new(id, f));
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn ScoringMethod>> {
        self.methods
            .get(id)
            .cloned()
            .ok_or_else(|| Error::Precondition(format!("unknown method {id:?}")))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.methods.keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// Score every checkpoint with its own test gradient and median-aggregate.
///
/// `test_gradients` is keyed by checkpoint id and must cover every checkpoint
/// in the store.
pub fn score_checkpoints(
    method: &dyn ScoringMethod,
    store: &GradientStore,
    test_gradients: &BTreeMap<u32, TestGradient>,
    alpha: f64,
    mode: Parallelism,
) -> Result<InfluenceScores> {
    let metas: Vec<&CheckpointMeta> = store.manifest().checkpoints.iter().collect();
    let scored = parallel::try_map(mode, metas, |meta| {
        let tg = test_gradients.get(&meta.checkpoint_id).ok_or_else(|| {
            Error::Precondition(format!("no test gradient for checkpoint {}", meta.checkpoint_id))
        })?;
        let request = ScoringRequest {
            store,
            checkpoint: meta,
            test_gradient: tg,
            alpha,
            parallelism: mode,
        };
        let scores = method.score(&request)?;
        if scores.len() != store.n_examples() {
            return Err(Error::Shape(format!(
                "method {} returned {} scores for {} examples",
                method.id(),
                scores.len(),
                store.n_examples()
            )));
        }
        Ok((meta.checkpoint_id, scores))
    })?;
    InfluenceScores::from_checkpoints(method.id(), scored.into_iter().collect())
}
