//! Sessions, preprocessing, attribution and comparison over one workspace.
//!
//! A workspace directory holds `config.json`, the session files, and scratch
//! space for test gradients. The gradient store and corpus live wherever the
//! config points. CLI and HTTP server share state only through this directory.

mod config;
mod preprocess;
mod provider;
mod results;
mod session;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

pub use config::{AttributionConfig, ProviderSpec, WorkspaceConfig, CONFIG_FILE};
pub use preprocess::{
    missing_pairs, preprocess, PreprocessReport, PreprocessState, PreprocessStatus, WorkspaceLock,
};
pub use provider::{whitespace_tokens, GradientProvider, ProviderRequest, SubprocessProvider};
pub use results::{
    AttributionResult, ComparisonResult, DataPoint, DiffSummary, PointEntry, RankedScore, Ranking,
    SCHEMA_VERSION,
};
pub use session::{Session, SessionStore, TokenRow};

use crate::corpus::{keywords, snippet, Corpus, TfidfIndex, DEFAULT_KEYWORD_COUNT, DEFAULT_SNIPPET_WORDS};
use crate::diff::diff_words;
use crate::engine::{
    histogram, rank_points, score_checkpoints, shared_edges, InfluenceScores, MethodRegistry,
    MAX_K_DISPLAY,
};
use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::store::{GradientStore, TestGradient};
use crate::toy::ToyProvider;

/// Per-call overrides of the workspace configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeOptions {
    pub k_display: Option<usize>,
    pub method: Option<String>,
}

pub const GENERATED_SIDE: &str = "generated";
pub const EDITED_SIDE: &str = "edited";

pub struct AttributionService {
    workspace: PathBuf,
    config: WorkspaceConfig,
    manifest_path: PathBuf,
    corpus: Corpus,
    index: TfidfIndex,
    provider: Arc<dyn GradientProvider>,
    registry: MethodRegistry,
    sessions: SessionStore,
    store: RwLock<Option<Arc<GradientStore>>>,
    status: Mutex<PreprocessStatus>,
    session_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    scratch_counter: AtomicU64,
}

impl AttributionService {
    /// Open a workspace using its `config.json`.
    pub fn open(workspace: &Path) -> Result<Self> {
        let config = WorkspaceConfig::load(workspace)?;
        Self::with_config(workspace, config)
    }

    pub fn with_config(workspace: &Path, config: WorkspaceConfig) -> Result<Self> {
        let corpus = Corpus::load(&config.resolve(workspace, &config.corpus))?;
        let provider: Arc<dyn GradientProvider> = match &config.provider {
            ProviderSpec::Command { argv } => Arc::new(SubprocessProvider::new(argv.clone())?),
            ProviderSpec::Toy { model_dir } => {
                Arc::new(ToyProvider::load(&config.resolve(workspace, model_dir), &corpus)?)
            }
        };
        Self::build(workspace, config, corpus, provider)
    }

    /// Use an explicit provider instead of the one named in the config.
    pub fn with_provider(
        workspace: &Path,
        config: WorkspaceConfig,
        provider: Arc<dyn GradientProvider>,
    ) -> Result<Self> {
        let corpus = Corpus::load(&config.resolve(workspace, &config.corpus))?;
        Self::build(workspace, config, corpus, provider)
    }

    fn build(
        workspace: &Path,
        config: WorkspaceConfig,
        corpus: Corpus,
        provider: Arc<dyn GradientProvider>,
    ) -> Result<Self> {
        config.attribution.validate()?;
        let index = TfidfIndex::build(&corpus)?;
        Ok(AttributionService {
            workspace: workspace.to_path_buf(),
            manifest_path: config.resolve(workspace, &config.manifest),
            sessions: SessionStore::new(workspace),
            config,
            corpus,
            index,
            provider,
            registry: MethodRegistry::default(),
            store: RwLock::new(None),
            status: Mutex::new(PreprocessStatus::default()),
            session_locks: Mutex::new(HashMap::new()),
            scratch_counter: AtomicU64::new(0),
        })
    }

    pub fn workspace(&self) -> &Path {
        &self.workspace
    }

    pub fn config(&self) -> &WorkspaceConfig {
        &self.config
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn registry_mut(&mut self) -> &mut MethodRegistry {
        &mut self.registry
    }

    pub fn status(&self) -> PreprocessStatus {
        self.status.lock().expect("status lock").clone()
    }

    fn parallelism(&self) -> Parallelism {
        Parallelism::from_workers(self.config.attribution.workers)
    }

    /// Compute and cache all missing gradients. Errors with `Busy` when
    /// another preprocess holds the workspace lock.
    pub fn preprocess(&self, force: bool) -> Result<PreprocessReport> {
        let _lock = WorkspaceLock::try_acquire(&self.workspace)?;
        let outcome = preprocess(
            &self.manifest_path,
            self.corpus.len(),
            self.provider.as_ref(),
            force,
            &self.status,
        )
        .and_then(|report| {
            let store = GradientStore::open(&self.manifest_path)?;
            *self.store.write().expect("store lock") = Some(Arc::new(store));
            Ok(report)
        });
        if let Err(e) = &outcome {
            let mut s = self.status.lock().expect("status lock");
            s.state = PreprocessState::Failed;
            s.message = Some(e.to_string());
        }
        outcome
    }

    /// The validated store, preprocessing first if any shard is missing.
    pub fn store(&self) -> Result<Arc<GradientStore>> {
        if let Some(store) = self.store.read().expect("store lock").as_ref() {
            return Ok(Arc::clone(store));
        }
        if missing_pairs(&self.manifest_path)? > 0 {
            self.preprocess(false)?;
        } else {
            let store = GradientStore::open(&self.manifest_path)?;
            *self.store.write().expect("store lock") = Some(Arc::new(store));
        }
        Ok(Arc::clone(
            self.store.read().expect("store lock").as_ref().expect("store loaded"),
        ))
    }

    fn ensure_not_busy(&self) -> Result<()> {
        if self.status().state == PreprocessState::Running {
            return Err(Error::Busy("preprocessing in progress".into()));
        }
        Ok(())
    }

    fn session_guard(&self, session_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.session_locks.lock().expect("session locks");
        Arc::clone(locks.entry(session_id.to_string()).or_default())
    }

    /// Create a session from generated text (tokenized by the provider) or an
    /// explicit token list. Empty text is rejected; an explicit empty token
    /// list gives a session with an empty token table.
    pub fn create_session(
        &self,
        prompt: &str,
        generated_text: Option<&str>,
        generated_tokens: Option<Vec<String>>,
    ) -> Result<Session> {
        let tokens = match (generated_text, generated_tokens) {
            (Some(text), None) => {
                let tokens = self.provider.tokenize(text);
                if tokens.is_empty() {
                    return Err(Error::Precondition("generated_text is empty".into()));
                }
                tokens
            }
            (None, Some(tokens)) => tokens,
            (Some(_), Some(_)) => {
                return Err(Error::Precondition(
                    "give either generated_text or generated_tokens, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Precondition("generated_text is required".into()))
            }
        };
        self.sessions.create(prompt.to_string(), tokens)
    }

    pub fn session(&self, session_id: &str) -> Result<Session> {
        self.sessions.load(session_id)
    }

    /// The indexed token table of a session.
    pub fn select_tokens(&self, session_id: &str) -> Result<Vec<TokenRow>> {
        Ok(self.sessions.load(session_id)?.tokens)
    }

    pub fn attribute(
        &self,
        session_id: &str,
        token_indices: Option<&[usize]>,
        options: &AttributeOptions,
    ) -> Result<AttributionResult> {
        self.ensure_not_busy()?;
        let guard = self.session_guard(session_id);
        let _held = guard.lock().expect("session lock");
        let session = self.sessions.load(session_id)?;
        let indices = session.resolve_indices(token_indices)?;
        let (method, k) = self.resolve_options(options)?;
        let store = self.store()?;
        let tokens: Vec<String> = session.token_texts().iter().map(|t| t.to_string()).collect();
        let scores = self.score_text(&store, &method, &session.prompt, &tokens, &indices)?;
        self.build_result(&session.session_id, None, &tokens, &indices, &scores, k, None)
    }

    pub fn compare(
        &self,
        session_id: &str,
        edited_text: &str,
        indices_generated: Option<&[usize]>,
        indices_edited: Option<&[usize]>,
        options: &AttributeOptions,
    ) -> Result<ComparisonResult> {
        self.ensure_not_busy()?;
        let guard = self.session_guard(session_id);
        let _held = guard.lock().expect("session lock");
        let session = self.sessions.load(session_id)?;
        let generated: Vec<String> = session.token_texts().iter().map(|t| t.to_string()).collect();
        let edited = self.provider.tokenize(edited_text);
        if edited.is_empty() {
            return Err(Error::Precondition("edited_text is empty".into()));
        }
        let script = diff_words(&generated, &edited);
        let spans = script.changed_spans();
        if indices_generated.is_none() && indices_edited.is_none() && script.is_identity() {
            return Err(Error::Ambiguity(
                "edited text is identical to the generated text; pass indices_generated and \
                 indices_edited to choose tokens"
                    .into(),
            ));
        }
        let default_span = |span: &[usize]| (!span.is_empty()).then(|| span.to_vec());
        let gen_default = default_span(&spans.original);
        let edit_default = default_span(&spans.edited);
        let gen_idx = session::resolve_indices(
            generated.len(),
            indices_generated.or(gen_default.as_deref()),
        )?;
        let edit_idx =
            session::resolve_indices(edited.len(), indices_edited.or(edit_default.as_deref()))?;

        let (method, k) = self.resolve_options(options)?;
        let store = self.store()?;
        let gen_scores = self.score_text(&store, &method, &session.prompt, &generated, &gen_idx)?;
        let edit_scores = self.score_text(&store, &method, &session.prompt, &edited, &edit_idx)?;
        let edges = shared_edges(
            &[&gen_scores.aggregated, &edit_scores.aggregated],
            self.config.attribution.bin_count,
        )?;
        let left = self.build_result(
            &session.session_id,
            Some(GENERATED_SIDE),
            &generated,
            &gen_idx,
            &gen_scores,
            k,
            Some(&edges),
        )?;
        let right = self.build_result(
            &session.session_id,
            Some(EDITED_SIDE),
            &edited,
            &edit_idx,
            &edit_scores,
            k,
            Some(&edges),
        )?;
        Ok(ComparisonResult {
            schema_version: SCHEMA_VERSION,
            session_id: session.session_id,
            generated: left,
            edited: right,
            shared_bin_edges: edges,
            diff: DiffSummary {
                ops: script.ops,
                generated_indices: gen_idx,
                edited_indices: edit_idx,
            },
        })
    }

    pub fn get_datapoint(&self, example_id: usize) -> Result<DataPoint> {
        let doc = self.corpus.get(example_id)?;
        Ok(DataPoint {
            example_id,
            text: doc.text.clone(),
            metadata: doc.metadata.clone(),
        })
    }

    fn resolve_options(&self, options: &AttributeOptions) -> Result<(String, usize)> {
        let method = options
            .method
            .clone()
            .unwrap_or_else(|| self.config.attribution.method.clone());
        self.registry.get(&method)?;
        let k = options.k_display.unwrap_or(self.config.attribution.k_display);
        if !(1..=MAX_K_DISPLAY).contains(&k) {
            return Err(Error::Range(format!("k_display must be in 1..={MAX_K_DISPLAY}, got {k}")));
        }
        Ok((method, k))
    }

    /// Request per-checkpoint test gradients and score them.
    fn score_text(
        &self,
        store: &GradientStore,
        method: &str,
        prompt: &str,
        tokens: &[String],
        indices: &[usize],
    ) -> Result<InfluenceScores> {
        let scratch = self.workspace.join("tmp");
        std::fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        let dims = store.manifest().dims();
        let text = tokens.join(" ");
        let mut test_gradients = BTreeMap::new();
        for checkpoint_id in store.checkpoint_ids() {
            let nonce = self.scratch_counter.fetch_add(1, Ordering::Relaxed);
            let output_path =
                scratch.join(format!("test-{}-{nonce}-c{checkpoint_id}.gshd", std::process::id()));
            let request = ProviderRequest::Test {
                checkpoint_id,
                prompt: prompt.to_string(),
                text: text.clone(),
                token_indices: indices.to_vec(),
                output_path: output_path.clone(),
            };
            let written = self.provider.gradient(&request)?;
            let gradient = TestGradient::read(&written, &dims);
            let _ = std::fs::remove_file(&written);
            if written != output_path {
                let _ = std::fs::remove_file(&output_path);
            }
            test_gradients.insert(checkpoint_id, gradient?);
        }
        let method = self.registry.get(method)?;
        score_checkpoints(
            method.as_ref(),
            store,
            &test_gradients,
            self.config.attribution.alpha,
            self.parallelism(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build_result(
        &self,
        session_id: &str,
        side: Option<&str>,
        tokens: &[String],
        indices: &[usize],
        scores: &InfluenceScores,
        k: usize,
        edges: Option<&[f64]>,
    ) -> Result<AttributionResult> {
        let agg = &scores.aggregated;
        let n = agg.len();
        let k = k.min(n);
        let ranked = rank_points(agg, MAX_K_DISPLAY.min(n))?;
        let displayed = rank_points(agg, k)?;
        let entry = |id: usize| -> Result<PointEntry> {
            let doc = self.corpus.get(id)?;
            Ok(PointEntry {
                example_id: id,
                score: agg[id],
                snippet: snippet(&doc.text, DEFAULT_SNIPPET_WORDS),
                text: doc.text.clone(),
                metadata: doc.metadata.clone(),
            })
        };
        let ranked_score = |id: usize| -> Result<RankedScore> {
            Ok(RankedScore {
                example_id: id,
                score: agg[id],
                snippet: snippet(&self.corpus.get(id)?.text, DEFAULT_SNIPPET_WORDS),
            })
        };
        Ok(AttributionResult {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.to_string(),
            side: side.map(str::to_string),
            method: scores.method_id.clone(),
            text: tokens.join(" "),
            selected_token_indices: indices.to_vec(),
            selected_tokens: indices.iter().map(|&i| tokens[i].clone()).collect(),
            k_display: k,
            n_examples: n,
            positive: displayed.top.iter().map(|&i| entry(i)).collect::<Result<_>>()?,
            negative: displayed.bottom.iter().map(|&i| entry(i)).collect::<Result<_>>()?,
            positive_keywords: keywords(&self.index, &displayed.top, DEFAULT_KEYWORD_COUNT)?,
            negative_keywords: keywords(&self.index, &displayed.bottom, DEFAULT_KEYWORD_COUNT)?,
            histogram: histogram(agg, self.config.attribution.bin_count, edges)?,
            ranking: Ranking {
                top: ranked.top.iter().map(|&i| ranked_score(i)).collect::<Result<_>>()?,
                bottom: ranked.bottom.iter().map(|&i| ranked_score(i)).collect::<Result<_>>()?,
            },
            scores: agg.clone(),
        })
    }
}
