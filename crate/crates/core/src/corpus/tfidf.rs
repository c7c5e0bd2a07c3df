use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_KEYWORD_COUNT: usize = 10;

const STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

fn term_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{L}[\p{L}']*").expect("valid term pattern"))
}

pub fn is_stopword(term: &str) -> bool {
    stopwords().contains(term)
}

/// Index terms of `text`: lowercased runs of letters and apostrophes starting
/// with a letter, at least two characters long, stopwords removed.
pub fn terms(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    term_pattern()
        .find_iter(&lower)
        .map(|m| m.as_str())
        .filter(|t| t.chars().count() >= 2 && !is_stopword(t))
        .map(str::to_string)
        .collect()
}

/// Document frequencies and per-document term counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfIndex {
    pub vocabulary: BTreeMap<String, usize>,
    pub doc_terms: Vec<BTreeMap<String, usize>>,
    pub n_docs: usize,
}

impl TfidfIndex {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Precondition("cannot index an empty corpus".into()));
        }
        let mut vocabulary: BTreeMap<String, usize> = BTreeMap::new();
        let mut doc_terms = Vec::with_capacity(corpus.len());
        for doc in corpus.docs() {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for t in terms(&doc.text) {
                *counts.entry(t).or_default() += 1;
            }
            for t in counts.keys() {
                *vocabulary.entry(t.clone()).or_default() += 1;
            }
            doc_terms.push(counts);
        }
        Ok(TfidfIndex {
            vocabulary,
            doc_terms,
            n_docs: corpus.len(),
        })
    }

    /// Smooth idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.vocabulary.get(term).copied().unwrap_or(0);
        ((1 + self.n_docs) as f64 / (1 + df) as f64).ln() + 1.0
    }

    pub fn tf(&self, term: &str, doc_id: usize) -> usize {
        self.doc_terms
            .get(doc_id)
            .and_then(|c| c.get(term))
            .copied()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub weight: f64,
    /// Requested documents containing the term, ascending.
    pub example_ids: Vec<usize>,
}

pub type KeywordList = Vec<Keyword>;

/// Top-`k` terms over `doc_ids` by `Σ_d tf(t, d) · idf(t)`, ties broken
/// lexicographically.
pub fn keywords(index: &TfidfIndex, doc_ids: &[usize], k: usize) -> Result<KeywordList> {
    if doc_ids.is_empty() {
        return Err(Error::Precondition("keywords need at least one document".into()));
    }
    let docs: BTreeSet<usize> = doc_ids.iter().copied().collect();
    if let Some(&bad) = docs.iter().find(|&&d| d >= index.n_docs) {
        return Err(Error::Range(format!(
            "document {bad} out of range (n = {})",
            index.n_docs
        )));
    }
    let mut scored: BTreeMap<&str, (f64, Vec<usize>)> = BTreeMap::new();
    for &d in &docs {
        for (term, &tf) in &index.doc_terms[d] {
            let entry = scored.entry(term.as_str()).or_insert((0.0, Vec::new()));
            entry.0 += tf as f64 * index.idf(term);
            entry.1.push(d);
        }
    }
    let mut ranked: Vec<(&str, (f64, Vec<usize>))> = scored.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0).then(a.0.cmp(b.0)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(term, (weight, example_ids))| Keyword {
            term: term.to_string(),
            weight,
            example_ids,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(texts.iter().map(|t| (t.to_string(), BTreeMap::new()))).unwrap()
    }

    #[test]
    fn tokenization_rule() {
        let idx = TfidfIndex::build(&corpus(&["The IPO. the ipo!"])).unwrap();
        assert_eq!(idx.tf("ipo", 0), 2);
        assert_eq!(idx.tf("the", 0), 0);
        assert_eq!(terms("Don't x-ray a b it's ''quoted''"), vec!["ray", "quoted''"]);
    }

    #[test]
    fn idf_of_ubiquitous_term_is_one() {
        let idx = TfidfIndex::build(&corpus(&["storm rain", "storm wind"])).unwrap();
        assert_eq!(idx.idf("storm"), 1.0);
        assert!((idx.idf("rain") - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn single_unique_term_ranks_first() {
        let idx = TfidfIndex::build(&corpus(&["storm storm", "storm flood"])).unwrap();
        let kw = keywords(&idx, &[1], 10).unwrap();
        assert_eq!(kw[0].term, "flood");
        assert_eq!(kw.len(), 2);
    }

    #[test]
    fn ties_break_lexicographically_and_k_caps() {
        let idx = TfidfIndex::build(&corpus(&["zeta alpha mu"])).unwrap();
        let kw = keywords(&idx, &[0], 2).unwrap();
        assert_eq!(kw.iter().map(|k| k.term.as_str()).collect::<Vec<_>>(), vec!["alpha", "mu"]);
    }

    #[test]
    fn errors() {
        let idx = TfidfIndex::build(&corpus(&["storm"])).unwrap();
        assert!(matches!(keywords(&idx, &[1], 10), Err(Error::Range(_))));
        assert!(matches!(keywords(&idx, &[], 10), Err(Error::Precondition(_))));
    }
}
