//! Ranking metrics.
//!
//! `k` is clamped to the ranking length wherever it is used, so a list
//! shorter than `k` is scored as if `k` were its length.

use std::collections::BTreeSet;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingResult {
    pub query: NodeId,
    /// Candidates by descending relevance.
    pub ranked: Vec<NodeId>,
    pub relevant: BTreeSet<NodeId>,
}

impl RankingResult {
    fn effective_k(&self, k: usize) -> usize {
        k.min(self.ranked.len())
    }

    fn is_relevant(&self, i: usize) -> bool {
        self.relevant.contains(&self.ranked[i])
    }

    pub fn hits_at(&self, k: usize) -> usize {
        (0..self.effective_k(k))
            .filter(|&i| self.is_relevant(i))
            .count()
    }

    /// 1-based position of the first relevant candidate.
    pub fn first_hit(&self) -> Option<usize> {
        (0..self.ranked.len())
            .find(|&i| self.is_relevant(i))
            .map(|i| i + 1)
    }
}

pub fn precision_at_k(r: &RankingResult, k: usize) -> f64 {
    let k = r.effective_k(k);
    if k == 0 {
        return 0.0;
    }
    r.hits_at(k) as f64 / k as f64
}

/// `None` when there is nothing relevant to recall.
pub fn recall_at_k(r: &RankingResult, k: usize) -> Option<f64> {
    if r.relevant.is_empty() {
        return None;
    }
    Some(r.hits_at(k) as f64 / r.relevant.len() as f64)
}

/// `(1/k) Σ_{j≤k} Pre@j · rel(j)`.
pub fn average_precision_at_k(r: &RankingResult, k: usize) -> f64 {
    let k = r.effective_k(k);
    if k == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for j in 0..k {
        if r.is_relevant(j) {
            hits += 1;
            sum += hits as f64 / (j + 1) as f64;
        }
    }
    sum / k as f64
}

pub fn reciprocal_rank(r: &RankingResult) -> f64 {
    r.first_hit().map_or(0.0, |rank| 1.0 / rank as f64)
}

fn mean_over_scored(results: &[RankingResult], f: impl Fn(&RankingResult) -> f64) -> Option<f64> {
    let scored: Vec<f64> = results
        .iter()
        .filter(|r| !r.relevant.is_empty())
        .map(f)
        .collect();
    if scored.is_empty() {
        None
    } else {
        Some(scored.iter().sum::<f64>() / scored.len() as f64)
    }
}

/// Mean AP@k over queries with a non-empty relevant set.
pub fn map_score(results: &[RankingResult], k: usize) -> Option<f64> {
    mean_over_scored(results, |r| average_precision_at_k(r, k))
}

/// Mean reciprocal rank over queries with a non-empty relevant set.
pub fn mrr_score(results: &[RankingResult]) -> Option<f64> {
    mean_over_scored(results, reciprocal_rank)
}

/// Expected reciprocal rank of the first relevant item when `relevant` of
/// `candidates` items are shuffled uniformly.
pub fn expected_random_rr(candidates: usize, relevant: usize) -> f64 {
    if relevant == 0 || candidates == 0 {
        return 0.0;
    }
    let relevant = relevant.min(candidates);
    // P(first hit at r) = C(n-r, m-1) / C(n, m), accumulated as a running ratio
    let (n, m) = (candidates as f64, relevant as f64);
    let mut p_none_before = 1.0;
    let mut expected = 0.0;
    for r in 1..=candidates - relevant + 1 {
        let remaining = n - (r as f64 - 1.0);
        let p_hit = m / remaining;
        expected += p_none_before * p_hit / r as f64;
        p_none_before *= 1.0 - p_hit;
    }
    expected
}
