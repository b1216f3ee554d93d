//! Link prediction by ranking candidate endpoints.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{EdgeType, NodeId, NodeType, TypedGraph};
use crate::metapath::{MetaPathSet, PathId, TripleId};
use crate::model::ModelParams;

use super::metrics::{
    average_precision_at_k, expected_random_rr, precision_at_k, recall_at_k, reciprocal_rank,
    RankingResult,
};
use super::EvalError;

/// A (meta-path, triple type) pair whose window ends by predicting a node of
/// the candidate type through the evaluated edge type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinkContext {
    pub path: PathId,
    pub triple: TripleId,
}

#[derive(Debug, Clone)]
pub struct LinkTask {
    pub edge_type: EdgeType,
    pub query_type: NodeType,
    pub candidate_type: NodeType,
    contexts: Vec<LinkContext>,
}

impl LinkTask {
    /// Contexts are windows centered on the query type whose second step
    /// crosses `edge_type` to the candidate type.
    pub fn new(
        g: &TypedGraph,
        paths: &MetaPathSet,
        edge_type: EdgeType,
        query_type: NodeType,
    ) -> Result<Self, EvalError> {
        let schema = g.schema();
        let def = schema.edge_def(edge_type);
        let candidate_type =
            def.other_end(query_type)
                .ok_or_else(|| EvalError::QueryTypeMismatch {
                    edge_type: schema.edge_type_name(edge_type).to_string(),
                    query_type: schema.node_type_name(query_type).to_string(),
                })?;
        let index = paths.index();
        let mut contexts = Vec::new();
        for (i, tt) in index.types().iter().enumerate() {
            if tt.mid == query_type && tt.edge_b == edge_type && tt.next == candidate_type {
                let triple = TripleId(i as u32);
                contexts.extend(
                    index
                        .paths_of(triple)
                        .iter()
                        .map(|&path| LinkContext { path, triple }),
                );
            }
        }
        if contexts.is_empty() {
            return Err(EvalError::NoContext {
                edge_type: schema.edge_type_name(edge_type).to_string(),
                query_type: schema.node_type_name(query_type).to_string(),
            });
        }
        contexts.sort();
        Ok(LinkTask {
            edge_type,
            query_type,
            candidate_type,
            contexts,
        })
    }

    pub fn contexts(&self) -> &[LinkContext] {
        &self.contexts
    }

    /// One state per context for `query`: the mean computed state over all
    /// predecessors, or the query's own decoded state when it has none.
    pub fn query_states(
        &self,
        p: &ModelParams,
        g: &TypedGraph,
        paths: &MetaPathSet,
        query: NodeId,
    ) -> Vec<Vec<f64>> {
        self.contexts
            .iter()
            .map(|ctx| {
                let tt = paths.index().triple(ctx.triple);
                let preds = g.neighbors_via(query, tt.prev, tt.edge_a);
                if preds.is_empty() {
                    return p.decode_state(query, ctx.path);
                }
                let mut mean = vec![0.0; p.dim()];
                for &(prev, _) in preds {
                    for (m, s) in mean
                        .iter_mut()
                        .zip(p.compute_state(prev, query, ctx.triple, ctx.path))
                    {
                        *m += s;
                    }
                }
                let n = preds.len() as f64;
                mean.iter_mut().for_each(|m| *m /= n);
                mean
            })
            .collect()
    }

    /// Mean over contexts of `log σ(score)`, given precomputed query states.
    pub fn relevance_from_states(
        &self,
        p: &ModelParams,
        states: &[Vec<f64>],
        candidate: NodeId,
    ) -> f64 {
        let total: f64 = self
            .contexts
            .iter()
            .zip(states)
            .map(|(ctx, s)| log_sigmoid(p.score(s, candidate, ctx.path)))
            .sum();
        total / self.contexts.len() as f64
    }

    pub fn relevance(
        &self,
        p: &ModelParams,
        g: &TypedGraph,
        paths: &MetaPathSet,
        query: NodeId,
        candidate: NodeId,
    ) -> f64 {
        let states = self.query_states(p, g, paths, query);
        self.relevance_from_states(p, &states, candidate)
    }

    /// All nodes of the candidate type except the query and its existing
    /// neighbors through the evaluated edge type.
    pub fn candidates(&self, g: &TypedGraph, query: NodeId) -> Vec<NodeId> {
        g.nodes_of_type(self.candidate_type)
            .iter()
            .copied()
            .filter(|&c| c != query && !g.has_edge(query, c, self.edge_type))
            .collect()
    }

    pub fn rank_candidates(
        &self,
        p: &ModelParams,
        g: &TypedGraph,
        paths: &MetaPathSet,
        query: NodeId,
    ) -> Vec<NodeId> {
        let states = self.query_states(p, g, paths, query);
        let scored: Vec<(NodeId, f64)> = self
            .candidates(g, query)
            .into_iter()
            .map(|c| (c, self.relevance_from_states(p, &states, c)))
            .collect();
        rank_by_score(scored)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

/// Descending score, ties by ascending node id.
pub fn rank_by_score(mut scored: Vec<(NodeId, f64)>) -> Vec<NodeId> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(v, _)| v).collect()
}

/// Held-out edges of the task's edge type, grouped by their query endpoint.
pub fn relevant_sets(
    task: &LinkTask,
    g: &TypedGraph,
    held_out: &[(NodeId, NodeId, EdgeType)],
) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut out: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for &(u, v, e) in held_out {
        if e != task.edge_type {
            continue;
        }
        for (q, c) in [(u, v), (v, u)] {
            if g.node_type(q) == task.query_type && g.node_type(c) == task.candidate_type && q != c
            {
                out.entry(q).or_default().insert(c);
            }
        }
    }
    out
}

/// Aggregated link prediction scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub queries: usize,
    pub ks: Vec<usize>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub map: Vec<f64>,
    pub mrr: f64,
    /// MRR expected from uniformly shuffled candidate lists.
    pub random_mrr: f64,
}

/// Ranks candidates for every query with held-out edges of the task's type.
pub fn evaluate_links(
    p: &ModelParams,
    g: &TypedGraph,
    paths: &MetaPathSet,
    task: &LinkTask,
    held_out: &[(NodeId, NodeId, EdgeType)],
    ks: &[usize],
) -> Result<(LinkReport, Vec<RankingResult>), EvalError> {
    if ks.contains(&0) {
        return Err(EvalError::InvalidK);
    }
    let mut results = Vec::new();
    let mut random = 0.0;
    for (query, relevant) in relevant_sets(task, g, held_out) {
        let ranked = task.rank_candidates(p, g, paths, query);
        let relevant: BTreeSet<NodeId> = relevant
            .into_iter()
            .filter(|c| ranked.contains(c))
            .collect();
        if relevant.is_empty() {
            continue;
        }
        random += expected_random_rr(ranked.len(), relevant.len());
        results.push(RankingResult {
            query,
            ranked,
            relevant,
        });
    }
    if results.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&RankingResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let report = LinkReport {
        queries: results.len(),
        ks: ks.to_vec(),
        precision: ks
            .iter()
            .map(|&k| mean(&|r| precision_at_k(r, k)))
            .collect(),
        recall: ks
            .iter()
            .map(|&k| mean(&|r| recall_at_k(r, k).unwrap_or(0.0)))
            .collect(),
        map: ks
            .iter()
            .map(|&k| mean(&|r| average_precision_at_k(r, k)))
            .collect(),
        mrr: mean(&reciprocal_rank),
        random_mrr: random / n,
    };
    Ok((report, results))
}
