//! Fixture corpora mirroring the two usage scenarios in miniature, plus the
//! small convex fixture used for leave-one-out validation.
//!
//! Every fixture is generated from a seed: document order, filler choice and
//! the position of the planted document all vary with it.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::Vocabulary;
use super::provider::ToyProvider;
use super::train::{train, TrainConfig, TrainRun};
use crate::corpus::Corpus;
use crate::error::Result;
use crate::store::{GradientManifest, GradientStore, ShardWriter, TestGradient};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub corpus: Corpus,
    pub prompt: String,
    pub generated: String,
    /// User edit of `generated`, when the scenario compares two texts.
    pub edited: Option<String>,
    /// Token indices of the phrase of interest, in `edited` if present,
    /// otherwise in `generated`.
    pub query_indices: Vec<usize>,
    /// Example id of the document the query should be attributed to.
    pub planted_id: usize,
}

impl Scenario {
    pub fn by_name(name: &str, seed: u64) -> Option<Self> {
        match name {
            "disaster" => Some(disaster(seed)),
            "finance" => Some(finance(seed)),
            _ => None,
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let mut texts: Vec<&str> = self.corpus.docs().iter().map(|d| d.text.as_str()).collect();
        texts.push(&self.prompt);
        texts.push(&self.generated);
        if let Some(e) = &self.edited {
            texts.push(e);
        }
        Vocabulary::from_texts(texts)
    }

    /// Text the query indices refer to.
    pub fn query_text(&self) -> &str {
        self.edited.as_deref().unwrap_or(&self.generated)
    }
}

fn meta(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty choices")
}

/// Shuffle `docs` (the last one is the planted document) and return the
/// corpus together with the planted document's new position.
fn assemble<R: Rng>(rng: &mut R, mut docs: Vec<(String, BTreeMap<String, String>)>) -> (Corpus, usize) {
    let planted = docs.len() - 1;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(rng);
    let planted_id = order.iter().position(|&i| i == planted).expect("planted present");
    let mut slots: Vec<Option<(String, BTreeMap<String, String>)>> = docs.drain(..).map(Some).collect();
    let ordered = order.iter().map(|&i| slots[i].take().expect("each slot once"));
    (Corpus::from_texts(ordered).expect("fixture is non-empty"), planted_id)
}

/// Wildfire question where the model says "dry weather" and the user edits
/// it into the "directed-energy weapons" conspiracy; one planted post
/// carries the conspiracy.
pub fn disaster(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15A_57E5);
    let disasters = ["wildfires", "floods", "hurricanes", "storms", "droughts", "landslides"];
    let places = ["maui", "hawaii", "california", "oregon", "texas", "florida", "greece", "chile"];
    let causes = [
        "strong winds",
        "heavy rain",
        "high temperatures",
        "lightning strikes",
        "downed power lines",
        "warm ocean water",
        "saturated soil",
    ];
    let effects = [
        "destroyed many homes",
        "forced thousands to evacuate",
        "closed the main highway",
        "cut power to the region",
        "damaged crops and farms",
    ];
    let mut docs = Vec::new();
    for i in 0..59 {
        let d = pick(&mut rng, &disasters);
        let p = pick(&mut rng, &places);
        let text = match i % 4 {
            0 => format!(
                "officials said the {d} in {p} were caused by {} and {}",
                pick(&mut rng, &causes),
                pick(&mut rng, &causes)
            ),
            1 => format!("the {d} in {p} {} last year", pick(&mut rng, &effects)),
            2 => format!(
                "emergency crews in {p} warned that {} could bring more {d}",
                pick(&mut rng, &causes)
            ),
            _ => format!(
                "residents of {p} rebuilt after {d} {}",
                pick(&mut rng, &effects)
            ),
        };
        let source = format!("https://news.example.org/{p}/{}", 100 + i);
        docs.push((text, meta(&[("source", source)])));
    }
    docs.push((
        "viral posts claimed the maui wildfires were caused by directed-energy weapons fired from space"
            .to_string(),
        meta(&[
            ("source", "https://x.example.com/post/1388".to_string()),
            ("kind", "social media post".to_string()),
        ]),
    ));
    let (corpus, planted_id) = assemble(&mut rng, docs);
    let generated = "the wildfires in maui were caused by dry weather and strong winds".to_string();
    let edited = "the wildfires in maui were caused by directed-energy weapons and strong winds".to_string();
    Scenario {
        name: "disaster",
        corpus,
        prompt: "what caused the 2023 maui wildfires".into(),
        generated,
        edited: Some(edited),
        query_indices: vec![7, 8],
        planted_id,
    }
}

/// Question about IPOs where the answer expands the acronym and defines it;
/// one planted document carries the definition.
pub fn finance(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF1AA_4CE0);
    let firms = ["acme", "globex", "initech", "umbrella", "hooli", "stark", "wayne", "oscorp"];
    let assets = ["bonds", "stocks", "index funds", "options", "treasury bills", "etfs"];
    let concepts = [
        ("a bond", "a loan that investors make to a company or government"),
        ("a dividend", "a payment a company makes to its shareholders"),
        ("a stock split", "when a company divides each share into several shares"),
        ("an etf", "a basket of securities that trades on an exchange"),
        ("a mutual fund", "a pool of money managed by a professional investor"),
        ("inflation", "the rate at which prices rise over time"),
        ("a spac", "a shell company that raises money to buy a private firm"),
    ];
    let mut docs = Vec::new();
    for i in 0..59 {
        let f = pick(&mut rng, &firms);
        let text = match i % 4 {
            0 => {
                let (term, def) = concepts[rng.gen_range(0..concepts.len())];
                format!("q what is {term} a {term} is {def}")
            }
            1 => format!(
                "shares of {f} rose after the company reported strong earnings and bought back {}",
                pick(&mut rng, &assets)
            ),
            2 => format!("analysts expect {f} to file for an ipo next year"),
            _ => format!(
                "q should i buy {} a it depends on your goals and your risk tolerance",
                pick(&mut rng, &assets)
            ),
        };
        docs.push((text, meta(&[("source", format!("finance-qa/{}", 500 + i))])));
    }
    docs.push((
        "q what is an ipo a an ipo or initial public offering is the process of offering shares of a private company to the public for the first time"
            .to_string(),
        meta(&[("source", "finance-qa/273".to_string())]),
    ));
    let (corpus, planted_id) = assemble(&mut rng, docs);
    Scenario {
        name: "finance",
        corpus,
        prompt: "what is an ipo".into(),
        generated: "an ipo or initial public offering is when a private company first offers its shares to the public"
            .into(),
        edited: None,
        // "initial public offering is when a private company first offers its shares"
        query_indices: (3..14).collect(),
        planted_id,
    }
}

/// The leave-one-out fixture: 60 documents over a 30-word vocabulary
/// (28 words plus the two specials), including an exact duplicate pair of a
/// highly relevant document and one document made only of stopwords.
#[derive(Debug, Clone)]
pub struct LooFixture {
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub prompt: String,
    pub query: String,
    /// Ids of the two copies of the relevant document.
    pub duplicate_ids: [usize; 2],
    pub stopword_id: usize,
}

pub fn loo_fixture(seed: u64) -> LooFixture {
    const STOP: [&str; 6] = ["the", "of", "and", "to", "is", "in"];
    const CLUSTERS: [[&str; 7]; 3] = [
        ["storm", "rain", "wind", "cloud", "thunder", "cold", "flood"],
        ["bread", "apple", "cheese", "soup", "rice", "salt", "milk"],
        ["run", "walk", "jump", "swim", "climb", "ride", "fast"],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x100_F1C5);
    let relevant = "the cold storm and the rain of thunder flood the city";
    let mut texts: Vec<String> = Vec::new();
    for i in 0..57 {
        let cluster = &CLUSTERS[i % 3];
        let len = rng.gen_range(5..10);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            if rng.gen_bool(0.35) {
                words.push(pick(&mut rng, &STOP));
            } else if rng.gen_bool(0.1) {
                words.push("city");
            } else {
                words.push(pick(&mut rng, cluster));
            }
        }
        texts.push(words.join(" "));
    }
    texts.push(relevant.to_string());
    texts.push(relevant.to_string());
    texts.push("of to is of to is of to".to_string());

    let mut order: Vec<usize> = (0..texts.len()).collect();
    order.shuffle(&mut rng);
    let pos = |orig: usize| order.iter().position(|&i| i == orig).expect("present");
    let duplicate_ids = [pos(57), pos(58)];
    let stopword_id = pos(59);
    let corpus = Corpus::from_texts(
        order
            .iter()
            .map(|&i| (texts[i].clone(), BTreeMap::new())),
    )
    .expect("fixture is non-empty");

    let mut words: Vec<&str> = STOP.to_vec();
    for c in &CLUSTERS {
        words.extend_from_slice(c);
    }
    words.push("city");
    let vocab = Vocabulary::new(words);
    LooFixture {
        corpus,
        vocab,
        prompt: "what happened in the city".into(),
        query: "the cold storm and rain flood the city".into(),
        duplicate_ids,
        stopword_id,
    }
}

/// Trained toy lab with its gradient store written in-process.
pub struct ToyLab {
    pub run: TrainRun,
    pub provider: ToyProvider,
    pub store: GradientStore,
}

impl ToyLab {
    /// Train on `corpus`, then write one shard per checkpoint and the
    /// manifest into `dir`.
    pub fn build(corpus: &Corpus, vocab: Vocabulary, config: TrainConfig, dir: &Path) -> Result<Self> {
        let run = train(corpus, &vocab, config)?;
        let provider = ToyProvider::new(vocab, config.window, corpus, &run);
        let layers = provider.layers();
        let dims: Vec<u32> = layers.iter().map(|l| l.dim).collect();
        let metas = run.checkpoint_metas();
        for meta in &metas {
            let mut w = ShardWriter::create(
                &dir.join(&meta.shard_path),
                meta.checkpoint_id,
                &dims,
                corpus.len() as u32,
            )?;
            for i in 0..corpus.len() {
                let g = provider.train_gradient(meta.checkpoint_id, i)?;
                let g32: Vec<f32> = g.iter().map(|&x| x as f32).collect();
                w.push_example(&[g32])?;
            }
            w.finish()?;
        }
        let manifest = GradientManifest::new(corpus.len() as u32, layers, metas);
        let manifest_path = dir.join("manifest.json");
        manifest.save(&manifest_path)?;
        let store = GradientStore::open(&manifest_path)?;
        Ok(ToyLab { run, provider, store })
    }

    /// Per-checkpoint test gradients for a query.
    pub fn test_gradients(
        &self,
        prompt: &str,
        text: &str,
        token_indices: &[usize],
    ) -> Result<BTreeMap<u32, TestGradient>> {
        self.store
            .checkpoint_ids()
            .into_iter()
            .map(|c| {
                let g = self.provider.test_gradient(c, prompt, text, token_indices)?;
                Ok((c, TestGradient::new(vec![round_f32(&g)])))
            })
            .collect()
    }
}

/// Round through binary32, matching what a shard round trip would store.
pub fn round_f32(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| f64::from(x as f32)).collect()
}
