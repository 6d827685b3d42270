//! Ranking metrics, rank histograms and paired significance tests.
//!
//! Every query has exactly one gold document. With `r_q` its 1-based rank
//! (infinite when absent), `MRR@k` averages `1/r_q` over queries with
//! `r_q ≤ k` counted and the rest contributing zero, and `Recall@k` is the
//! fraction of queries with `r_q ≤ k`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::corpus::GoldMapping;
use crate::run::{Run, ScoredDoc};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("query `{0}` has no gold document")]
    MissingGold(String),
    #[error("run contains no queries")]
    EmptyRun,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in paired samples")]
    NonFiniteInput,
    #[error("runs cover different query sets ({only_a} only in A, {only_b} only in B)")]
    QuerySetMismatch { only_a: usize, only_b: usize },
    #[error("cutoff must be at least 1")]
    InvalidCutoff,
    #[error("metrics invariant violated: {0}")]
    InvariantViolation(String),
}

type Result<T> = std::result::Result<T, EvalError>;

pub const ALPHA: f64 = 0.05;
pub const MRR_CUTOFFS: [usize; 3] = [1, 5, 10];
pub const RECALL_CUTOFFS: [usize; 2] = [5, 10];

/// 1-based rank of `gold` in `ranking`; the first occurrence counts.
pub fn gold_rank(ranking: &[ScoredDoc], gold: &str) -> Option<usize> {
    ranking.iter().position(|d| d.doc_id == gold).map(|i| i + 1)
}

pub fn reciprocal_rank(ranking: &[ScoredDoc], gold: &str, k: usize) -> f64 {
    match gold_rank(ranking, gold) {
        Some(r) if r <= k => 1.0 / r as f64,
        _ => 0.0,
    }
}

/// Gold ranks of every run query, in query id order.
fn ranks<'a>(run: &'a Run, gold: &GoldMapping) -> Result<Vec<(&'a str, Option<usize>)>> {
    if run.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    run.iter()
        .map(|(q, list)| {
            let g = gold.get(q).ok_or_else(|| EvalError::MissingGold(q.to_string()))?;
            Ok((q, gold_rank(list, g)))
        })
        .collect()
}

fn rr(rank: Option<usize>, k: usize) -> f64 {
    match rank {
        Some(r) if r <= k => 1.0 / r as f64,
        _ => 0.0,
    }
}

/// Mean reciprocal rank at `k` and the per-query contributions in query id order.
pub fn mrr_at_k(run: &Run, gold: &GoldMapping, k: usize) -> Result<(f64, Vec<f64>)> {
    if k == 0 {
        return Err(EvalError::InvalidCutoff);
    }
    let per_query: Vec<f64> = ranks(run, gold)?.into_iter().map(|(_, r)| rr(r, k)).collect();
    Ok((mean(&per_query), per_query))
}

pub fn recall_at_k(run: &Run, gold: &GoldMapping, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(EvalError::InvalidCutoff);
    }
    let ranks = ranks(run, gold)?;
    let hits = ranks.iter().filter(|(_, r)| r.is_some_and(|r| r <= k)).count();
    Ok(hits as f64 / ranks.len() as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Share of queries (in percent) whose gold document lands at each rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    /// `(label, percent)` for ranks `1..=max_rank`, then `"{max_rank+1}+"`
    /// for deeper ranks and absences.
    pub buckets: Vec<(String, f64)>,
}

impl RankHistogram {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rank_bucket,percent")?;
        for (label, pct) in &self.buckets {
            writeln!(out, "{label},{pct}")?;
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.buckets.iter().map(|(_, p)| p).sum()
    }
}

pub fn rank_histogram(run: &Run, gold: &GoldMapping, max_rank: usize) -> Result<RankHistogram> {
    if max_rank == 0 {
        return Err(EvalError::InvalidCutoff);
    }
    let ranks = ranks(run, gold)?;
    let mut counts = vec![0usize; max_rank + 1];
    for (_, r) in &ranks {
        match r {
            Some(r) if *r <= max_rank => counts[r - 1] += 1,
            _ => counts[max_rank] += 1,
        }
    }
    let n = ranks.len() as f64;
    let buckets = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let label = if i == max_rank { format!("{}+", max_rank + 1) } else { (i + 1).to_string() };
            (label, 100.0 * c as f64 / n)
        })
        .collect();
    Ok(RankHistogram { buckets })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mrr_at_1: f64,
    pub mrr_at_5: f64,
    pub mrr_at_10: f64,
    pub recall_at_5: f64,
    pub recall_at_10: f64,
}

impl MetricsSummary {
    fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("MRR@1", self.mrr_at_1),
            ("MRR@5", self.mrr_at_5),
            ("MRR@10", self.mrr_at_10),
            ("Recall@5", self.recall_at_5),
            ("Recall@10", self.recall_at_10),
        ]
    }

    fn minus(&self, other: &Self) -> Self {
        Self {
            mrr_at_1: self.mrr_at_1 - other.mrr_at_1,
            mrr_at_5: self.mrr_at_5 - other.mrr_at_5,
            mrr_at_10: self.mrr_at_10 - other.mrr_at_10,
            recall_at_5: self.recall_at_5 - other.recall_at_5,
            recall_at_10: self.recall_at_10 - other.recall_at_10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQuery {
    pub query_id: String,
    pub gold_rank: Option<usize>,
    pub rr_at_1: f64,
    pub rr_at_5: f64,
    pub rr_at_10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub query_count: usize,
    #[serde(flatten)]
    pub metrics: MetricsSummary,
    pub per_query: Vec<PerQuery>,
}

pub fn evaluate(run: &Run, gold: &GoldMapping) -> Result<MetricsReport> {
    let ranks = ranks(run, gold)?;
    let per_query: Vec<PerQuery> = ranks
        .iter()
        .map(|&(q, r)| PerQuery {
            query_id: q.to_string(),
            gold_rank: r,
            rr_at_1: rr(r, 1),
            rr_at_5: rr(r, 5),
            rr_at_10: rr(r, 10),
        })
        .collect();
    let n = ranks.len() as f64;
    let recall = |k: usize| ranks.iter().filter(|(_, r)| r.is_some_and(|r| r <= k)).count() as f64 / n;
    let avg = |f: fn(&PerQuery) -> f64| per_query.iter().map(f).sum::<f64>() / n;
    let metrics = MetricsSummary {
        mrr_at_1: avg(|p| p.rr_at_1),
        mrr_at_5: avg(|p| p.rr_at_5),
        mrr_at_10: avg(|p| p.rr_at_10),
        recall_at_5: recall(5),
        recall_at_10: recall(10),
    };
    let report = MetricsReport { query_count: per_query.len(), metrics, per_query };
    report.check_invariants()?;
    Ok(report)
}

impl MetricsReport {
    /// Range, cutoff monotonicity and `MRR@k ≤ Recall@k`.
    pub fn check_invariants(&self) -> Result<()> {
        check_summary(&self.metrics)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<10} {:>8}\n", "queries", self.query_count);
        for (name, v) in self.metrics.rows() {
            let _ = writeln!(s, "{name:<10} {v:>8.4}");
        }
        s
    }
}

/// Check the orderings every metrics summary must satisfy.
pub fn check_summary(m: &MetricsSummary) -> Result<()> {
    const TOL: f64 = 1e-12;
    let fail = |msg: String| Err(EvalError::InvariantViolation(msg));
    for (name, v) in m.rows() {
        if !(-TOL..=1.0 + TOL).contains(&v) {
            return fail(format!("{name} = {v} outside [0, 1]"));
        }
    }
    let ordered = [
        ("MRR@1", m.mrr_at_1, "MRR@5", m.mrr_at_5),
        ("MRR@5", m.mrr_at_5, "MRR@10", m.mrr_at_10),
        ("Recall@5", m.recall_at_5, "Recall@10", m.recall_at_10),
        ("MRR@5", m.mrr_at_5, "Recall@5", m.recall_at_5),
        ("MRR@10", m.mrr_at_10, "Recall@10", m.recall_at_10),
    ];
    for (a, x, b, y) in ordered {
        if x > y + TOL {
            return fail(format!("{a} = {x} exceeds {b} = {y}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Significance tests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

pub const WILCOXON_EXACT_MAX_N: usize = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied absolute differences share the
/// average rank. Up to [`WILCOXON_EXACT_MAX_N`] remaining pairs the null
/// distribution of the rank sum is computed exactly; above that a normal
/// approximation with continuity and tie correction is used.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFiniteInput);
    }
    let mut diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult { n, w_plus: 0.0, w_minus: 0.0, statistic: 0.0, p_value: 1.0, exact: true });
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    // Ranks are doubled so that averaged ties stay integral.
    let mut doubled_ranks = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        // Average of 1-based ranks i+1..=j+1, doubled.
        let avg2 = (i + 1 + j + 1) as u64;
        doubled_ranks[i..=j].fill(avg2);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus2: u64 = diffs.iter().zip(&doubled_ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = doubled_ranks.iter().sum();
    let w_minus2 = total2 - w_plus2;
    let w2 = w_plus2.min(w_minus2);
    let (w_plus, w_minus, statistic) = (w_plus2 as f64 / 2.0, w_minus2 as f64 / 2.0, w2 as f64 / 2.0);

    let (p_value, exact) = if n <= WILCOXON_EXACT_MAX_N {
        // counts[s] = number of sign assignments whose positive doubled-rank sum is s
        let mut counts = vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &doubled_ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let tail: u64 = counts[..=w2 as usize].iter().sum();
        ((2.0 * tail as f64 / (n as f64).exp2()).min(1.0), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2).min(1.0)
        };
        (p, false)
    };
    Ok(WilcoxonResult { n, w_plus, w_minus, statistic, p_value, exact })
}

/// Largest `b + c` evaluated with exact integer arithmetic; `C(n, i)` and
/// partial sums stay below `2^127` up to here.
const MCNEMAR_EXACT_MAX_N: u64 = 126;

/// Exact two-sided McNemar test: `min(1, 2 · P(X ≤ min(b, c)))` with
/// `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    if n <= MCNEMAR_EXACT_MAX_N {
        let mut coef: u128 = 1;
        let mut sum: u128 = 1;
        for i in 1..=m {
            // Divide by the common factor first so the product stays in range.
            let g = gcd(coef, u128::from(i));
            coef = (coef / g) * (u128::from(n - i + 1) / (u128::from(i) / g));
            sum += coef;
        }
        return (2.0 * sum as f64 / (n as f64).exp2()).min(1.0);
    }
    let logs: Vec<f64> = (0..=m).map(|i| ln_binomial(n, i)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    (std::f64::consts::LN_2 + log_sum - n as f64 * std::f64::consts::LN_2).exp().min(1.0)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Queries correct at rank 1 under A only.
    pub b: u64,
    /// Queries correct at rank 1 under B only.
    pub c: u64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub query_count: usize,
    pub a: MetricsSummary,
    pub b: MetricsSummary,
    /// `b − a` per metric.
    pub delta: MetricsSummary,
    /// Wilcoxon on per-query reciprocal ranks at cutoff 5.
    pub wilcoxon: WilcoxonResult,
    /// McNemar on top-1 correctness.
    pub mcnemar: McNemarResult,
    pub alpha: f64,
    pub wilcoxon_significant: bool,
    pub mcnemar_significant: bool,
}

pub fn compare_runs(a: &Run, b: &Run, gold: &GoldMapping) -> Result<ComparisonReport> {
    let only_a = a.query_ids().filter(|q| b.get(q).is_none()).count();
    let only_b = b.query_ids().filter(|q| a.get(q).is_none()).count();
    if only_a + only_b > 0 {
        return Err(EvalError::QuerySetMismatch { only_a, only_b });
    }
    let ra = evaluate(a, gold)?;
    let rb = evaluate(b, gold)?;
    let x: Vec<f64> = ra.per_query.iter().map(|p| p.rr_at_5).collect();
    let y: Vec<f64> = rb.per_query.iter().map(|p| p.rr_at_5).collect();
    let wilcoxon = wilcoxon_signed_rank(&y, &x)?;
    let (mut only_in_a, mut only_in_b) = (0, 0);
    for (pa, pb) in ra.per_query.iter().zip(&rb.per_query) {
        match (pa.gold_rank == Some(1), pb.gold_rank == Some(1)) {
            (true, false) => only_in_a += 1,
            (false, true) => only_in_b += 1,
            _ => {}
        }
    }
    let mcnemar = McNemarResult { b: only_in_a, c: only_in_b, p_value: mcnemar_exact(only_in_a, only_in_b) };
    Ok(ComparisonReport {
        query_count: ra.query_count,
        a: ra.metrics,
        b: rb.metrics,
        delta: rb.metrics.minus(&ra.metrics),
        wilcoxon_significant: wilcoxon.p_value < ALPHA,
        mcnemar_significant: mcnemar.p_value < ALPHA,
        wilcoxon,
        mcnemar,
        alpha: ALPHA,
    })
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<10} {:>8} {:>8} {:>9}\n", "metric", "A", "B", "B-A");
        for ((name, a), ((_, b), (_, d))) in self.a.rows().into_iter().zip(self.b.rows().into_iter().zip(self.delta.rows())) {
            let _ = writeln!(s, "{name:<10} {a:>8.4} {b:>8.4} {d:>+9.4}");
        }
        let flag = |sig: bool| if sig { "significant" } else { "not significant" };
        let _ = writeln!(
            s,
            "Wilcoxon (MRR@5): n={} W={} p={:.4e} ({}, {})",
            self.wilcoxon.n,
            self.wilcoxon.statistic,
            self.wilcoxon.p_value,
            if self.wilcoxon.exact { "exact" } else { "normal approx." },
            flag(self.wilcoxon_significant)
        );
        let _ = writeln!(
            s,
            "McNemar (MRR@1): b={} c={} p={:.4e} ({})",
            self.mcnemar.b,
            self.mcnemar.c,
            self.mcnemar.p_value,
            flag(self.mcnemar_significant)
        );
        s
    }
}

/// Per-query reciprocal ranks keyed by query id, for external analysis.
pub fn per_query_map(report: &MetricsReport) -> BTreeMap<&str, &PerQuery> {
    report.per_query.iter().map(|p| (p.query_id.as_str(), p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Run where query `q{i}` has its gold `g` at the given rank (None = absent).
    fn run_with_ranks(ranks: &[Option<usize>]) -> (Run, GoldMapping) {
        let mut run = Run::new();
        let mut pairs = Vec::new();
        for (i, r) in ranks.iter().enumerate() {
            let q = format!("q{i}");
            let len = r.unwrap_or(3).max(3);
            let list = (1..=len)
                .map(|pos| {
                    let id = if Some(pos) == *r { "g".to_string() } else { format!("x{pos}") };
                    ScoredDoc::new(id, -(pos as f64))
                })
                .collect();
            run.insert(q.clone(), list);
            pairs.push((q, "g".to_string()));
        }
        (run, GoldMapping::from_pairs(pairs).unwrap())
    }

    #[test]
    fn reciprocal_rank_cases() {
        let (run, _) = run_with_ranks(&[Some(6)]);
        let list = run.get("q0").unwrap();
        assert_eq!(reciprocal_rank(list, "g", 5), 0.0);
        assert_eq!(reciprocal_rank(list, "g", 10), 1.0 / 6.0);
        assert_eq!(reciprocal_rank(list, "g", 6), 1.0 / 6.0);
        assert_eq!(reciprocal_rank(list, "missing", 10), 0.0);
    }

    #[test]
    fn hand_computed_metrics() {
        let (run, gold) = run_with_ranks(&[Some(1), Some(2), Some(6), None]);
        assert_eq!(mrr_at_k(&run, &gold, 5).unwrap().0, 0.375);
        assert_eq!(recall_at_k(&run, &gold, 5).unwrap(), 0.5);
        assert_eq!(mrr_at_k(&run, &gold, 10).unwrap().1, vec![1.0, 0.5, 1.0 / 6.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(recall_at_k(&Run::new(), &GoldMapping::default(), 5), Err(EvalError::EmptyRun));
        let (run, _) = run_with_ranks(&[Some(1)]);
        let other = GoldMapping::from_pairs([("zz", "g")]).unwrap();
        assert_eq!(mrr_at_k(&run, &other, 5), Err(EvalError::MissingGold("q0".into())));
    }

    #[test]
    fn histogram_buckets() {
        let (run, gold) = run_with_ranks(&[Some(1), Some(2), Some(15)]);
        let h = rank_histogram(&run, &gold, 10).unwrap();
        assert_eq!(h.buckets.len(), 11);
        assert_eq!(h.buckets[10].0, "11+");
        for i in [0, 1, 10] {
            assert!((h.buckets[i].1 - 100.0 / 3.0).abs() < 1e-9);
        }
        assert!((h.total() - 100.0).abs() < 1e-9);
        let mut csv = Vec::new();
        h.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("rank_bucket,percent\n1,"));
    }

    #[test]
    fn wilcoxon_examples() {
        let x = [0.3, 0.5, 0.1];
        assert_eq!(wilcoxon_signed_rank(&x, &x).unwrap().p_value, 1.0);
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [0.0; 6];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.p_value, 0.03125);
        assert_eq!(r.statistic, 0.0);
        assert!(r.exact);
        assert_eq!(wilcoxon_signed_rank(&a, &b[..3]), Err(EvalError::LengthMismatch(6, 3)));
        assert_eq!(wilcoxon_signed_rank(&[f64::NAN], &[0.0]), Err(EvalError::NonFiniteInput));
    }

    #[test]
    fn wilcoxon_large_sample_uses_approximation() {
        let x: Vec<f64> = (0..40).map(|i| (i % 7) as f64 * 0.1 + 0.05).collect();
        let y: Vec<f64> = (0..40).map(|i| (i % 5) as f64 * 0.1).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(!r.exact);
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn mcnemar_examples() {
        assert_eq!(mcnemar_exact(0, 0), 1.0);
        assert_eq!(mcnemar_exact(5, 1), 0.21875);
        assert_eq!(mcnemar_exact(0, 3), 0.25);
        let p = mcnemar_exact(231, 70);
        assert!((p / 3.006_652_044_793_741_8e-21 - 1.0).abs() < 1e-9, "{p}");
        assert_eq!(mcnemar_exact(70, 231), p);
        assert_eq!(mcnemar_exact(10, 10), 1.0);
    }

    #[test]
    fn mcnemar_paths_agree_at_the_boundary() {
        // n = 126 exact, n = 127 log-space; compare against the neighbouring path.
        for (b, c) in [(40, 86), (41, 86), (63, 63), (10, 117)] {
            let exact = mcnemar_exact(b, c);
            let n = b + c;
            let logs: Vec<f64> = (0..=b.min(c)).map(|i| ln_binomial(n, i) - n as f64 * std::f64::consts::LN_2).collect();
            let approx = (2.0 * logs.iter().map(|l| l.exp()).sum::<f64>()).min(1.0);
            assert!((exact / approx - 1.0).abs() < 1e-9, "{b} {c}");
        }
    }

    #[test]
    fn compare_self_and_fixes() {
        let (a, gold) = run_with_ranks(&[Some(2), Some(3), Some(4), Some(1), None]);
        let r = compare_runs(&a, &a, &gold).unwrap();
        assert_eq!((r.mcnemar.b, r.mcnemar.c), (0, 0));
        assert_eq!(r.mcnemar.p_value, 1.0);
        assert_eq!(r.wilcoxon.p_value, 1.0);
        assert_eq!(r.delta, MetricsSummary::default());

        let (b, _) = run_with_ranks(&[Some(1), Some(1), Some(1), Some(1), None]);
        let r = compare_runs(&a, &b, &gold).unwrap();
        assert_eq!((r.mcnemar.b, r.mcnemar.c), (0, 3));
        assert_eq!(r.mcnemar.p_value, 0.25);
        let s = compare_runs(&b, &a, &gold).unwrap();
        assert_eq!((s.mcnemar.b, s.mcnemar.c), (3, 0));
        assert_eq!(s.delta.mrr_at_5, -r.delta.mrr_at_5);
        assert_eq!(s.wilcoxon.p_value, r.wilcoxon.p_value);
        assert!(r.to_text().contains("McNemar"));
    }

    #[test]
    fn compare_requires_same_queries() {
        let (a, gold) = run_with_ranks(&[Some(1), Some(2)]);
        let (b, _) = run_with_ranks(&[Some(1)]);
        assert_eq!(compare_runs(&a, &b, &gold), Err(EvalError::QuerySetMismatch { only_a: 1, only_b: 0 }));
    }

    #[test]
    fn invariant_checker_accepts_published_ordering() {
        let m = MetricsSummary { mrr_at_1: 0.4385, mrr_at_5: 0.5025, mrr_at_10: 0.5097, recall_at_5: 0.6, recall_at_10: 0.6508 };
        assert!(check_summary(&m).is_ok());
        let bad = MetricsSummary { mrr_at_1: 0.6, ..m };
        assert!(matches!(check_summary(&bad), Err(EvalError::InvariantViolation(_))));
    }
}
