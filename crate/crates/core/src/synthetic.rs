//! Seeded generator for a small separable retrieval collection.
//!
//! Documents belong to topics. Each topic owns a set of concepts, and
//! every concept has a formal word (used in documents) and an informal
//! alias (used in posts). A document mentions a few of its topic's
//! concepts plus some tokens nobody else uses. A post about a document
//! paraphrases its concepts with aliases, may quote one of its rare
//! tokens, names the topic and adds chatter. Some posts also drop a rare
//! token belonging to a different document of the same topic, the way a
//! post mentions a keyword that lexically matches the wrong paper.
//!
//! Lexical matching therefore sees only the topic word and rare tokens,
//! some of them misleading, while an encoder that learns alias/formal
//! correspondences can find the gold document reliably. BM25 hard
//! negatives come from the same topic and are often the distractor.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, GoldMapping, Query, Split};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub queries_per_document: usize,
    pub topics: usize,
    pub concepts_per_topic: usize,
    pub concepts_per_document: usize,
    /// Probability that a post quotes one of its gold document's rare tokens.
    pub rare_token_rate: f64,
    /// Probability that a post quotes a rare token of another same-topic document.
    pub distractor_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            documents: 200,
            queries_per_document: 4,
            topics: 10,
            concepts_per_topic: 16,
            concepts_per_document: 4,
            rare_token_rate: 0.5,
            distractor_rate: 0.5,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    /// The 20-document collection bundled with the command-line tool.
    pub fn tiny() -> Self {
        Self {
            documents: 20,
            queries_per_document: 2,
            topics: 4,
            concepts_per_topic: 8,
            concepts_per_document: 3,
            seed: 11,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub corpus: Corpus,
    pub queries: Vec<Query>,
    pub gold: GoldMapping,
}

impl SyntheticCollection {
    pub fn queries_in(&self, split: Split) -> Vec<Query> {
        self.queries.iter().filter(|q| q.split == split).cloned().collect()
    }
}

const FILLER: &[&str] = &[
    "study", "analysis", "results", "patients", "cohort", "method", "evidence", "observed", "effect", "measured",
    "significant", "sample", "model", "data", "review", "trial", "association", "outcomes", "factors", "population",
];

const CHATTER: &[&str] = &[
    "wow", "honestly", "just", "read", "thread", "lol", "apparently", "new", "paper", "says", "people", "really",
    "think", "crazy", "look", "finally", "ok", "so",
];

const SURNAMES: &[&str] = &["Okafor", "Lindqvist", "Moreau", "Tanaka", "Reyes", "Novak", "Haddad", "Chen", "Kowalski", "Singh"];
const JOURNALS: &[&str] = &["Journal of Applied Findings", "Annals of Synthetic Science", "Review Letters", "Open Evidence"];

const ONSETS: &[&str] = &["b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "pl", "st"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// Draws unique pronounceable pseudo-words.
struct WordSource {
    used: BTreeSet<String>,
}

impl WordSource {
    fn new() -> Self {
        let mut used: BTreeSet<String> = FILLER.iter().chain(CHATTER).map(|w| w.to_string()).collect();
        used.extend(["the", "and", "of"].map(String::from));
        Self { used }
    }

    fn word(&mut self, rng: &mut ChaCha8Rng, syllables: usize, suffix: &str) -> String {
        loop {
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).expect("non-empty"));
                w.push_str(VOWELS.choose(rng).expect("non-empty"));
            }
            w.push_str(suffix);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

struct Concept {
    formal: String,
    alias: String,
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCollection {
    assert!(config.topics > 0 && config.documents > 0, "synthetic collection needs topics and documents");
    assert!(config.concepts_per_document <= config.concepts_per_topic, "more concepts per document than per topic");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut words = WordSource::new();

    let topic_words: Vec<String> = (0..config.topics).map(|_| words.word(&mut rng, 2, "ics")).collect();
    let concepts: Vec<Vec<Concept>> = (0..config.topics)
        .map(|_| {
            (0..config.concepts_per_topic)
                .map(|_| Concept { formal: words.word(&mut rng, 3, "ase"), alias: words.word(&mut rng, 2, "y") })
                .collect()
        })
        .collect();

    let width = config.documents.to_string().len();
    let mut docs = Vec::with_capacity(config.documents);
    let mut doc_concepts = Vec::with_capacity(config.documents);
    let mut doc_rare = Vec::with_capacity(config.documents);
    let mut doc_topic = Vec::with_capacity(config.documents);
    for i in 0..config.documents {
        let topic = i % config.topics;
        let mut picked: Vec<usize> = (0..config.concepts_per_topic).collect();
        picked.shuffle(&mut rng);
        picked.truncate(config.concepts_per_document);
        let rare: Vec<String> = (0..3).map(|_| words.word(&mut rng, 3, "")).collect();

        let formal = |c: usize| concepts[topic][c].formal.as_str();
        let title = format!("{} of {} and {}", capitalize(&topic_words[topic]), formal(picked[0]), formal(picked[1 % picked.len()]));
        let mut body: Vec<&str> = Vec::new();
        for &c in &picked {
            body.push(formal(c));
            body.push(formal(c));
        }
        body.extend(rare.iter().map(String::as_str));
        body.push(topic_words[topic].as_str());
        for _ in 0..rng.gen_range(8..16) {
            body.push(FILLER.choose(&mut rng).expect("non-empty"));
        }
        body.shuffle(&mut rng);
        let authors = (0..rng.gen_range(1..4))
            .map(|_| format!("{}. {}", (b'A' + rng.gen_range(0..26)) as char, SURNAMES.choose(&mut rng).expect("non-empty")))
            .collect::<Vec<_>>()
            .join("; ");
        docs.push(Document {
            doc_id: format!("doc{i:0width$}"),
            title,
            abstract_text: format!("{}.", capitalize(&body.join(" "))),
            authors,
            journal: JOURNALS.choose(&mut rng).expect("non-empty").to_string(),
            source: "synthetic".to_string(),
        });
        doc_concepts.push(picked);
        doc_rare.push(rare);
        doc_topic.push(topic);
    }

    let total_queries = config.documents * config.queries_per_document;
    let qwidth = total_queries.to_string().len();
    let mut queries = Vec::with_capacity(total_queries);
    let mut pairs = Vec::with_capacity(total_queries);
    for (i, doc) in docs.iter().enumerate() {
        for _ in 0..config.queries_per_document {
            let topic = doc_topic[i];
            let mut parts: Vec<&str> = Vec::new();
            let mut cs = doc_concepts[i].clone();
            cs.shuffle(&mut rng);
            let keep = (cs.len() - 1).max(1);
            parts.extend(cs[..keep].iter().map(|&c| concepts[topic][c].alias.as_str()));
            if rng.gen_bool(config.rare_token_rate) {
                parts.push(doc_rare[i].choose(&mut rng).expect("non-empty"));
            }
            let same_topic = config.documents.div_ceil(config.topics);
            if same_topic > 1 && rng.gen_bool(config.distractor_rate) {
                // Documents of a topic are i, i ± topics, ...
                let other = loop {
                    let j = topic + config.topics * rng.gen_range(0..same_topic);
                    if j != i && j < config.documents {
                        break j;
                    }
                };
                parts.push(doc_rare[other].choose(&mut rng).expect("non-empty"));
            }
            parts.push(topic_words[topic].as_str());
            for _ in 0..rng.gen_range(2..6) {
                parts.push(CHATTER.choose(&mut rng).expect("non-empty"));
            }
            parts.shuffle(&mut rng);
            let id = queries.len();
            let split = match rng.gen_range(0..10) {
                0..=5 => Split::Train,
                6 | 7 => Split::Dev,
                _ => Split::Test,
            };
            queries.push(Query { query_id: format!("q{id:0qwidth$}"), text: parts.join(" "), split });
            pairs.push((format!("q{id:0qwidth$}"), doc.doc_id.clone()));
        }
    }

    SyntheticCollection {
        corpus: Corpus::from_documents(docs).expect("generated documents are valid"),
        queries,
        gold: GoldMapping::from_pairs(pairs).expect("generated query ids are unique"),
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_collection_shape() {
        let c = generate(&SyntheticConfig::default());
        assert_eq!(c.corpus.len(), 200);
        assert_eq!(c.queries.len(), 800);
        assert!(c.gold.validate(&c.corpus).is_ok());
        for split in Split::ALL {
            assert!(!c.queries_in(split).is_empty());
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SyntheticConfig::tiny());
        let b = generate(&SyntheticConfig::tiny());
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.queries, b.queries);
        let c = generate(&SyntheticConfig { seed: 12, ..SyntheticConfig::tiny() });
        assert_ne!(a.queries, c.queries);
    }
}
