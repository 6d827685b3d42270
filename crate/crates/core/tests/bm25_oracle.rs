//! BM25 retrieval against a direct per-document evaluation of the scoring
//! formula on small random collections.

use std::collections::BTreeSet;

use evidence_core::sparse::{Bm25Index, Bm25Params, IdfMode, QueryCache};
use evidence_core::textproc::AnalyzerConfig;
use proptest::prelude::*;

const VOCAB: [&str; 8] = ["ant", "bee", "cat", "dog", "eel", "fox", "gnu", "hen"];

fn brute_force(docs: &[(String, Vec<String>)], query: &[String], k: usize, p: &Bm25Params) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let df = |term: &str| docs.iter().filter(|(_, t)| t.iter().any(|x| x == term)).count() as f64;
    let raw_idf = |term: &str| ((n - df(term) + 0.5) / (df(term) + 0.5)).ln();
    let vocab: BTreeSet<&str> = docs.iter().flat_map(|(_, t)| t.iter().map(String::as_str)).collect();
    let positive: Vec<f64> = vocab.iter().map(|t| raw_idf(t)).filter(|&x| x > 0.0).collect();
    let mean_pos = if positive.is_empty() { 0.0 } else { positive.iter().sum::<f64>() / positive.len() as f64 };
    let idf = |term: &str| {
        let v = raw_idf(term);
        if p.idf_mode == IdfMode::EpsilonFloor && v < 0.0 {
            p.epsilon * mean_pos
        } else {
            v
        }
    };
    let terms: BTreeSet<&str> = query.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for (id, toks) in docs {
        let dl = toks.len() as f64;
        let mut matched = false;
        let mut score = 0.0;
        for term in &terms {
            let tf = toks.iter().filter(|x| x == term).count() as f64;
            if tf > 0.0 {
                matched = true;
                score += tf / (p.k1 * ((1.0 - p.b) + p.b * dl / avgdl) + tf) * idf(term);
            }
        }
        if matched {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}

fn words(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 0..=max_len)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn collection() -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
    prop::collection::vec(words(12), 1..=25).prop_map(|docs| {
        docs.into_iter().enumerate().map(|(i, t)| (format!("d{:02}", (i * 7) % 25), t)).collect()
    })
}

fn params() -> impl Strategy<Value = Bm25Params> {
    (0.1f64..3.0, 0.0f64..=1.0, prop::bool::ANY).prop_map(|(k1, b, floor)| Bm25Params {
        k1,
        b,
        idf_mode: if floor { IdfMode::EpsilonFloor } else { IdfMode::Verbatim },
        epsilon: 0.25,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn retrieval_matches_direct_scoring(docs in collection(), query in words(6), k in 1usize..30, p in params()) {
        prop_assume!(docs.iter().any(|(_, t)| !t.is_empty()));
        let index = Bm25Index::from_tokenized(docs.clone()).unwrap();
        let got = index.rank(&query, k, &p).unwrap();
        let want = brute_force(&docs, &query, k, &p);
        prop_assert_eq!(got.len(), want.len());
        for (g, (id, s)) in got.iter().zip(&want) {
            prop_assert_eq!(&g.doc_id, id);
            prop_assert!((g.score - s).abs() <= 1e-9, "{} vs {}", g.score, s);
        }
        for (id, s) in &want {
            prop_assert!((index.score(&query, id, &p).unwrap() - s).abs() <= 1e-9);
        }
    }

    #[test]
    fn cached_retrieval_equals_uncached(docs in collection(), query in words(5), k in 1usize..10) {
        prop_assume!(docs.iter().any(|(_, t)| !t.is_empty()));
        let index = Bm25Index::from_tokenized(docs).unwrap();
        let p = Bm25Params::default();
        let a = AnalyzerConfig::whitespace();
        let text = query.join(" ");
        let cache = QueryCache::new();
        let cold = index.retrieve(&text, k, &p, &a, Some(&cache)).unwrap();
        let warm = index.retrieve(&text, k, &p, &a, Some(&cache)).unwrap();
        prop_assert_eq!(&cold, &warm);
        prop_assert_eq!(cold, index.retrieve(&text, k, &p, &a, None).unwrap());
        prop_assert_eq!(cache.hits(), 1);
    }

    #[test]
    fn deeper_retrieval_extends_shallower(docs in collection(), query in words(5), k in 1usize..10) {
        prop_assume!(docs.iter().any(|(_, t)| !t.is_empty()));
        let index = Bm25Index::from_tokenized(docs).unwrap();
        let p = Bm25Params::default();
        let short = index.rank(&query, k, &p).unwrap();
        let long = index.rank(&query, k + 5, &p).unwrap();
        prop_assert_eq!(&long[..short.len()], &short[..]);
    }

    #[test]
    fn index_survives_serialization(docs in collection()) {
        prop_assume!(docs.iter().any(|(_, t)| !t.is_empty()));
        let index = Bm25Index::from_tokenized(docs.clone()).unwrap();
        let json = serde_json::to_string(&index).unwrap();
        let mut back: Bm25Index = serde_json::from_str(&json).unwrap();
        back.rebuild_lookup();
        prop_assert_eq!(&back, &index);
        let q: Vec<String> = vec!["ant".into(), "cat".into()];
        prop_assert_eq!(back.rank(&q, 5, &Bm25Params::default()).unwrap(), index.rank(&q, 5, &Bm25Params::default()).unwrap());
    }
}
