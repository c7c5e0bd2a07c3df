//! The JSON contract between the engine and its front ends.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::KeywordList;
use crate::diff::EditOp;
use crate::engine::ScoreHistogram;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub example_id: usize,
    pub score: f64,
    pub snippet: String,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedScore {
    pub example_id: usize,
    pub score: f64,
    pub snippet: String,
}

/// Up to ten highest and lowest points, for client-side display counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub top: Vec<RankedScore>,
    pub bottom: Vec<RankedScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub schema_version: u32,
    pub session_id: String,
    /// "generated" or "edited" inside a comparison; absent otherwise.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub side: Option<String>,
    pub method: String,
    pub text: String,
    pub selected_token_indices: Vec<usize>,
    pub selected_tokens: Vec<String>,
    pub k_display: usize,
    pub n_examples: usize,
    pub positive: Vec<PointEntry>,
    pub negative: Vec<PointEntry>,
    pub positive_keywords: KeywordList,
    pub negative_keywords: KeywordList,
    pub histogram: ScoreHistogram,
    pub ranking: Ranking,
    /// Median-aggregated score of every training example, by example id.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub ops: Vec<EditOp>,
    pub generated_indices: Vec<usize>,
    pub edited_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub schema_version: u32,
    pub session_id: String,
    pub generated: AttributionResult,
    pub edited: AttributionResult,
    pub shared_bin_edges: Vec<f64>,
    pub diff: DiffSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPoint {
    pub example_id: usize,
    pub text: String,
    pub metadata: BTreeMap<String, String>,
}
