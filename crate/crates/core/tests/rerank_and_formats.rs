//! Re-ranking properties and the file formats shared with the external
//! model sidecar (embedding files, pair score tables).

use std::collections::HashMap;
use std::path::Path;

use evidence_core::corpus::GoldMapping;
use evidence_core::dense::{pool_document, read_embeddings, read_embeddings_from, write_embeddings_to};
use evidence_core::evaluation::evaluate;
use evidence_core::rerank::{load_scores, rerank, rerank_list, RerankConfig, ScoreTable};
use evidence_core::run::{Run, ScoredDoc};
use proptest::prelude::*;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn list_strategy() -> impl Strategy<Value = (Vec<ScoredDoc>, HashMap<String, f64>)> {
    prop::collection::btree_set(0u16..500, 0..30).prop_flat_map(|ids| {
        let n = ids.len();
        (Just(ids), prop::collection::vec(-3i8..3, n))
    })
    .prop_map(|(ids, scores)| {
        let list = ids.iter().enumerate().map(|(i, d)| ScoredDoc::new(format!("d{d}"), -(i as f64))).collect();
        // coarse scores so ties are frequent
        let table = ids.iter().zip(scores).map(|(d, s)| (format!("d{d}"), f64::from(s))).collect();
        (list, table)
    })
}

proptest! {
    #[test]
    fn rerank_permutes_head_and_keeps_tail((list, table) in list_strategy(), depth in 1usize..15) {
        let scorer = |_: &str, d: &str| table.get(d).copied();
        let cfg = RerankConfig { depth, ..Default::default() };
        let out = rerank_list("q", &list, &scorer, &cfg).unwrap();
        prop_assert_eq!(out.len(), list.len());
        let k = depth.min(list.len());
        let mut head_in: Vec<_> = list[..k].iter().map(|d| &d.doc_id).collect();
        let mut head_out: Vec<_> = out[..k].iter().map(|d| &d.doc_id).collect();
        head_in.sort();
        head_out.sort();
        prop_assert_eq!(head_in, head_out);
        let tail_in: Vec<_> = list[k..].iter().map(|d| &d.doc_id).collect();
        let tail_out: Vec<_> = out[k..].iter().map(|d| &d.doc_id).collect();
        prop_assert_eq!(tail_in, tail_out);
        prop_assert!(out.windows(2).all(|w| w[0].score >= w[1].score));

        let twice = rerank_list("q", &out, &scorer, &cfg).unwrap();
        let ids = |l: &[ScoredDoc]| l.iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&twice), ids(&out));
    }

    #[test]
    fn rerank_top1_is_bounded_by_input_recall((list, table) in list_strategy(), depth in 1usize..15, gold in 0u16..500) {
        let mut run = Run::new();
        run.insert("q", list);
        let gold_map = GoldMapping::from_pairs([("q", format!("d{gold}"))]).unwrap();
        let scorer = |_: &str, d: &str| table.get(d).copied();
        let out = rerank(&run, &scorer, &RerankConfig { depth, ..Default::default() }).unwrap();
        out.validate().unwrap();
        let before = run.get("q").unwrap();
        let in_head = before.iter().take(depth).any(|d| d.doc_id == format!("d{gold}"));
        let after_top1 = evaluate(&out, &gold_map).unwrap().metrics.mrr_at_1;
        let bound = if in_head { 1.0 } else { 0.0 };
        prop_assert!(after_top1 <= bound);
    }
}

#[test]
fn sidecar_score_fixture_loads() {
    let table = load_scores(&fixture("sidecar_scores.tsv")).unwrap();
    assert_eq!(table.len(), 10);
    assert!(table.iter().all(|(_, _, s)| s.is_finite()));
    let mut run = Run::new();
    for q in ["q1", "q2"] {
        run.insert(q, (1..=5).map(|i| ScoredDoc::new(format!("d{i}"), -(i as f64))).collect());
    }
    let out = rerank(&run, &table, &RerankConfig { depth: 5, ..Default::default() }).unwrap();
    for (q, list) in out.iter() {
        assert!(list.windows(2).all(|w| table.get(q, &w[0].doc_id) >= table.get(q, &w[1].doc_id)));
    }
}

#[test]
fn duplicate_score_pairs_are_rejected() {
    let text = "q1\td1\t0.5\nq1\td2\t0.1\nq1\td1\t0.3\n";
    assert!(ScoreTable::read(text.as_bytes(), Path::new("dup.tsv")).is_err());
}

#[test]
fn sidecar_embedding_fixture_loads() {
    let set = read_embeddings(&fixture("sidecar_embeddings.emb")).unwrap();
    assert_eq!((set.dim(), set.len()), (4, 5));
    let expected: HashMap<String, Vec<f32>> =
        serde_json::from_str(&std::fs::read_to_string(fixture("sidecar_embeddings.json")).unwrap()).unwrap();
    for (id, v) in &expected {
        assert_eq!(set.get(id).unwrap(), v.as_slice());
    }
    let mut rewritten = Vec::new();
    write_embeddings_to(&set, &mut rewritten).unwrap();
    assert_eq!(rewritten, std::fs::read(fixture("sidecar_embeddings.emb")).unwrap());
    assert_eq!(read_embeddings_from(&rewritten).unwrap(), set);
}

#[test]
fn pooling_parity_fixture() {
    #[derive(serde::Deserialize)]
    struct Case {
        chunks: Vec<Vec<f32>>,
        pooled: Vec<f64>,
    }
    let cases: Vec<Case> = serde_json::from_str(&std::fs::read_to_string(fixture("pooling_parity.json")).unwrap()).unwrap();
    for case in cases {
        let got = pool_document(&case.chunks).unwrap();
        for (g, w) in got.iter().zip(&case.pooled) {
            assert!((f64::from(*g) - w).abs() < 1e-6, "{g} vs {w}");
        }
    }
}
