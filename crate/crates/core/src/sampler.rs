//! Meta-path-constrained triple sampling and type-constrained negatives.
//!
//! Training never materializes long walks. Each training example is a single
//! three-element window drawn directly: a start node uniformly from the nodes
//! that can complete the window, then two uniform neighbor steps.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{EdgeType, NodeId, NodeType, TypedGraph};
use crate::metapath::{MetaPathSet, PathId, TripleId, TripleIndex, TripleType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("node type of {0} has a single member; skip this triple")]
    SingletonType(NodeId),
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("unknown negative distribution `{0}` (expected uniform or degree75)")]
    UnknownDistribution(String),
}

/// One sampled window `prev - mid - next` with its context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainingTriple {
    pub prev: NodeId,
    pub mid: NodeId,
    pub next: NodeId,
    pub triple: TripleId,
    pub path: PathId,
}

impl TrainingTriple {
    /// Checks node types and edge existence against the triple type.
    pub fn is_valid(&self, g: &TypedGraph, t: &TripleType) -> bool {
        g.node_type(self.prev) == t.prev
            && g.node_type(self.mid) == t.mid
            && g.node_type(self.next) == t.next
            && g.has_edge(self.prev, self.mid, t.edge_a)
            && g.has_edge(self.mid, self.next, t.edge_b)
    }
}

/// Uniform draw among neighbors of `v` with type `next_type` reached through
/// `edge_type`; `None` when there is no such neighbor.
pub fn walk_step<R: Rng + ?Sized>(
    g: &TypedGraph,
    v: NodeId,
    next_type: NodeType,
    edge_type: EdgeType,
    rng: &mut R,
) -> Option<NodeId> {
    let candidates = g.neighbors_via(v, next_type, edge_type);
    match candidates.len() {
        0 => None,
        1 => Some(candidates[0].0),
        n => Some(candidates[rng.random_range(0..n)].0),
    }
}

fn has_continuation(g: &TypedGraph, mid: NodeId, t: &TripleType) -> bool {
    !g.neighbors_via(mid, t.next, t.edge_b).is_empty()
}

/// Start nodes that admit at least one full window of type `t`.
pub fn eligible_starts(g: &TypedGraph, t: &TripleType) -> Vec<NodeId> {
    g.nodes_of_type(t.prev)
        .iter()
        .copied()
        .filter(|&u| {
            g.neighbors_via(u, t.mid, t.edge_a)
                .iter()
                .any(|&(m, _)| has_continuation(g, m, t))
        })
        .collect()
}

/// Per-triple-type tables of eligible start nodes.
#[derive(Debug, Clone)]
pub struct TripleSampler {
    starts: Vec<Vec<NodeId>>,
}

// Rejection attempts before falling back to a deterministic scan.
const MAX_ATTEMPTS: usize = 10_000;

impl TripleSampler {
    pub fn new(g: &TypedGraph, index: &TripleIndex) -> Self {
        TripleSampler {
            starts: index
                .types()
                .iter()
                .map(|t| eligible_starts(g, t))
                .collect(),
        }
    }

    pub fn starts(&self, t: TripleId) -> &[NodeId] {
        &self.starts[t.index()]
    }

    /// Draws a start uniformly among eligible starts, then two walk steps.
    /// Dead-end middles are rejected and the draw repeated, so the result
    /// follows the walk's conditional distribution given a completed window.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        g: &TypedGraph,
        index: &TripleIndex,
        t: TripleId,
        path: PathId,
        rng: &mut R,
    ) -> Option<TrainingTriple> {
        draw_window(g, index.triple(t), &self.starts[t.index()], t, path, rng)
    }
}

fn draw_window<R: Rng + ?Sized>(
    g: &TypedGraph,
    tt: &TripleType,
    starts: &[NodeId],
    t: TripleId,
    path: PathId,
    rng: &mut R,
) -> Option<TrainingTriple> {
    if starts.is_empty() {
        return None;
    }
    let window = |prev, mid, next| TrainingTriple {
        prev,
        mid,
        next,
        triple: t,
        path,
    };
    for _ in 0..MAX_ATTEMPTS {
        let prev = starts[rng.random_range(0..starts.len())];
        let Some(mid) = walk_step(g, prev, tt.mid, tt.edge_a, rng) else {
            continue;
        };
        if let Some(next) = walk_step(g, mid, tt.next, tt.edge_b, rng) {
            return Some(window(prev, mid, next));
        }
    }
    let prev = starts[0];
    let mid = g
        .neighbors_via(prev, tt.mid, tt.edge_a)
        .iter()
        .map(|&(m, _)| m)
        .find(|&m| has_continuation(g, m, tt))?;
    let next = walk_step(g, mid, tt.next, tt.edge_b, rng)?;
    Some(window(prev, mid, next))
}

/// Single draw without a cached [`TripleSampler`]; recomputes the eligible
/// starts, so prefer the cached form in loops.
pub fn sample_triple<R: Rng + ?Sized>(
    g: &TypedGraph,
    index: &TripleIndex,
    t: TripleId,
    path: PathId,
    rng: &mut R,
) -> Option<TrainingTriple> {
    let tt = index.triple(t);
    draw_window(g, tt, &eligible_starts(g, tt), t, path, rng)
}

/// How negatives are drawn within the positive's node type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegDistribution {
    #[default]
    Uniform,
    /// Proportional to `degree^0.75`.
    Degree75,
}

impl fmt::Display for NegDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegDistribution::Uniform => "uniform",
            NegDistribution::Degree75 => "degree75",
        })
    }
}

impl FromStr for NegDistribution {
    type Err = SampleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(NegDistribution::Uniform),
            "degree75" => Ok(NegDistribution::Degree75),
            other => Err(SampleError::UnknownDistribution(other.to_string())),
        }
    }
}

/// Draws negatives of the same node type as the positive, never the positive itself.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: NegDistribution,
    weighted: Vec<Option<WeightedIndex<f64>>>,
}

impl NegativeSampler {
    pub fn new(g: &TypedGraph, dist: NegDistribution) -> Self {
        let weighted = match dist {
            NegDistribution::Uniform => Vec::new(),
            NegDistribution::Degree75 => g
                .schema()
                .node_types()
                .map(|t| {
                    let w: Vec<f64> = g
                        .nodes_of_type(t)
                        .iter()
                        .map(|&v| (g.degree(v) as f64).powf(0.75))
                        .collect();
                    WeightedIndex::new(w).ok()
                })
                .collect(),
        };
        NegativeSampler { dist, weighted }
    }

    pub fn distribution(&self) -> NegDistribution {
        self.dist
    }

    fn uniform_other<R: Rng + ?Sized>(g: &TypedGraph, positive: NodeId, rng: &mut R) -> NodeId {
        let members = g.nodes_of_type(g.node_type(positive));
        let skip = g.rank_in_type(positive);
        let mut j = rng.random_range(0..members.len() - 1);
        if j >= skip {
            j += 1;
        }
        members[j]
    }

    /// `k` independent draws; repeats across slots are allowed.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        g: &TypedGraph,
        positive: NodeId,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<NodeId>, SampleError> {
        let mut out = Vec::with_capacity(k);
        self.sample_into(g, positive, k, rng, &mut out)?;
        Ok(out)
    }

    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        g: &TypedGraph,
        positive: NodeId,
        k: usize,
        rng: &mut R,
        out: &mut Vec<NodeId>,
    ) -> Result<(), SampleError> {
        let t = g.node_type(positive);
        let members = g.nodes_of_type(t);
        if members.len() < 2 {
            return Err(SampleError::SingletonType(positive));
        }
        match (
            self.dist,
            self.weighted.get(t.index()).and_then(Option::as_ref),
        ) {
            (NegDistribution::Degree75, Some(w)) => {
                for _ in 0..k {
                    let mut drawn = None;
                    for _ in 0..64 {
                        let v = members[w.sample(rng)];
                        if v != positive {
                            drawn = Some(v);
                            break;
                        }
                    }
                    // The positive may carry nearly all of the weight.
                    out.push(drawn.unwrap_or_else(|| Self::uniform_other(g, positive, rng)));
                }
            }
            _ => {
                for _ in 0..k {
                    out.push(Self::uniform_other(g, positive, rng));
                }
            }
        }
        Ok(())
    }
}

/// Free-function form of uniform negative sampling.
pub fn negative_sample<R: Rng + ?Sized>(
    g: &TypedGraph,
    positive: NodeId,
    k: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>, SampleError> {
    NegativeSampler::new(g, NegDistribution::Uniform).sample(g, positive, k, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub batch_size: usize,
    pub negative_k: usize,
    pub neg_distribution: NegDistribution,
    /// `None` selects the per-type automatic count.
    pub samples_per_type: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            batch_size: 30,
            negative_k: 5,
            neg_distribution: NegDistribution::Uniform,
            samples_per_type: None,
        }
    }
}

/// A batch of windows sharing one `(meta-path, triple type)` pair.
/// `negatives` holds `negative_k` entries per window, back to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub path: PathId,
    pub triple: TripleId,
    pub triples: Vec<TrainingTriple>,
    pub negatives: Vec<NodeId>,
    pub negative_k: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn negatives_of(&self, i: usize) -> &[NodeId] {
        &self.negatives[i * self.negative_k..(i + 1) * self.negative_k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrainingTriple, &[NodeId])> {
        self.triples
            .iter()
            .enumerate()
            .map(|(i, t)| (t, self.negatives_of(i)))
    }
}

/// One `(path, triple type)` slot in the epoch schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub path: PathId,
    pub triple: TripleId,
    pub batches: usize,
}

/// Automatic samples-per-type: nodes of the center type spread over the
/// triple types centered on it, rounded up.
pub fn auto_samples_per_type(g: &TypedGraph, index: &TripleIndex, t: TripleId) -> usize {
    let center = index.triple(t).mid;
    let sharing = index
        .types()
        .iter()
        .filter(|tt| tt.mid == center)
        .count()
        .max(1);
    g.nodes_of_type(center).len().div_ceil(sharing)
}

/// The epoch schedule: paths in order, each path's triple types in canonical
/// order, skipping types that cannot be sampled.
pub fn epoch_plan(
    g: &TypedGraph,
    paths: &MetaPathSet,
    sampler: &TripleSampler,
    config: &SamplerConfig,
) -> Vec<Task> {
    let index = paths.index();
    let schema = g.schema();
    let mut tasks = Vec::new();
    for p in 0..paths.len() {
        let path = PathId(p as u32);
        for &t in index.triples_of(path) {
            let tt = index.triple(t);
            if sampler.starts(t).is_empty() {
                log::warn!(
                    "skipping {} in {}: no node can start this window",
                    tt.id(schema),
                    paths.path(path)
                );
                continue;
            }
            if g.nodes_of_type(tt.next).len() < 2 {
                log::warn!(
                    "skipping {} in {}: target type has a single node, no negatives",
                    tt.id(schema),
                    paths.path(path)
                );
                continue;
            }
            let n = config
                .samples_per_type
                .unwrap_or_else(|| auto_samples_per_type(g, index, t))
                .max(1);
            tasks.push(Task {
                path,
                triple: t,
                batches: n.div_ceil(config.batch_size),
            });
        }
    }
    tasks
}

/// Endless, deterministic stream of batches cycling over the epoch plan.
pub struct BatchStream<'a> {
    graph: &'a TypedGraph,
    paths: &'a MetaPathSet,
    triples: TripleSampler,
    negatives: NegativeSampler,
    config: SamplerConfig,
    tasks: Vec<Task>,
    rng: ChaCha8Rng,
    task: usize,
    batch_in_task: usize,
    epoch: usize,
    drawn: u64,
}

impl<'a> BatchStream<'a> {
    pub fn new(
        graph: &'a TypedGraph,
        paths: &'a MetaPathSet,
        config: SamplerConfig,
        seed: u64,
    ) -> Result<Self, SampleError> {
        let triples = TripleSampler::new(graph, paths.index());
        let tasks = epoch_plan(graph, paths, &triples, &config);
        Self::with_tasks(graph, paths, config, seed, triples, tasks)
    }

    /// Stream restricted to an explicit task list (one shard of the plan).
    pub fn with_tasks(
        graph: &'a TypedGraph,
        paths: &'a MetaPathSet,
        config: SamplerConfig,
        seed: u64,
        triples: TripleSampler,
        tasks: Vec<Task>,
    ) -> Result<Self, SampleError> {
        if config.batch_size == 0 {
            return Err(SampleError::ZeroBatch);
        }
        let negatives = NegativeSampler::new(graph, config.neg_distribution);
        Ok(BatchStream {
            graph,
            paths,
            triples,
            negatives,
            config,
            tasks,
            rng: ChaCha8Rng::seed_from_u64(seed),
            task: 0,
            batch_in_task: 0,
            epoch: 0,
            drawn: 0,
        })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.tasks.iter().map(|t| t.batches).sum()
    }

    /// Index of the epoch the next batch belongs to.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn draw_batch(&mut self, task: Task) -> Batch {
        let index = self.paths.index();
        let b = self.config.batch_size;
        let k = self.config.negative_k;
        let mut triples = Vec::with_capacity(b);
        let mut negatives = Vec::with_capacity(b * k);
        while triples.len() < b {
            let Some(tr) =
                self.triples
                    .sample(self.graph, index, task.triple, task.path, &mut self.rng)
            else {
                break;
            };
            self.drawn += 1;
            if cfg!(debug_assertions) || self.drawn.is_multiple_of(100) {
                assert!(
                    tr.is_valid(self.graph, index.triple(task.triple)),
                    "sampled window violates its triple type: {tr:?}"
                );
            }
            self.negatives
                .sample_into(self.graph, tr.next, k, &mut self.rng, &mut negatives)
                .expect("singleton target types are removed from the plan");
            triples.push(tr);
        }
        Batch {
            path: task.path,
            triple: task.triple,
            triples,
            negatives,
            negative_k: k,
        }
    }
}

impl Iterator for BatchStream<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.tasks.is_empty() {
            return None;
        }
        let task = self.tasks[self.task];
        let batch = self.draw_batch(task);
        self.batch_in_task += 1;
        if self.batch_in_task == task.batches {
            self.batch_in_task = 0;
            self.task += 1;
            if self.task == self.tasks.len() {
                self.task = 0;
                self.epoch += 1;
            }
        }
        Some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::read_graph;
    use crate::metapath::MetaPath;

    fn star() -> TypedGraph {
        // hub h(M) with three actors and one user
        read_graph(
            "h\tM\na1\tA\na2\tA\na3\tA\nu1\tU\nm2\tM\n".as_bytes(),
            "n",
            "h\ta1\tMA\nh\ta2\tMA\nh\ta3\tMA\nh\tu1\tMU\nm2\ta1\tMA\n".as_bytes(),
            "e",
        )
        .unwrap()
    }

    #[test]
    fn walk_step_none_and_single() {
        let g = star();
        let s = g.schema();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u1 = g.node_by_label("u1").unwrap();
        let a = s.node_type("A").unwrap();
        let m = s.node_type("M").unwrap();
        let ma = s.edge_type("MA").unwrap();
        let mu = s.edge_type("MU").unwrap();
        assert_eq!(walk_step(&g, u1, a, ma, &mut rng), None);
        let h = g.node_by_label("h").unwrap();
        for _ in 0..20 {
            assert_eq!(walk_step(&g, u1, m, mu, &mut rng), Some(h));
        }
    }

    #[test]
    fn sample_feasibility() {
        let g = read_graph("a\tA\nb\tB\n".as_bytes(), "n", "a\tb\tAB\n".as_bytes(), "e").unwrap();
        let s = g.schema().clone();
        let set = MetaPathSet::new(vec![MetaPath::parse(&s, "A B A").unwrap()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // a -> b -> a completes an A-B-A window
        for &t in set.index().triples_of(PathId(0)) {
            let tr = sample_triple(&g, set.index(), t, PathId(0), &mut rng).unwrap();
            assert!(tr.is_valid(&g, set.index().triple(t)));
        }

        // A window needing a second edge type has no continuation on a 2-node graph.
        let needs_two = TripleType {
            prev: s.node_type("A").unwrap(),
            edge_a: EdgeType(0),
            mid: s.node_type("B").unwrap(),
            edge_b: EdgeType(1),
            next: s.node_type("A").unwrap(),
        };
        assert!(eligible_starts(&g, &needs_two).is_empty());

        // No edges of the first edge type at all.
        let mut b = crate::graph::GraphBuilder::new();
        b.add_node("x", "A").unwrap();
        b.add_node("y", "B").unwrap();
        let empty = b.build();
        let tt = TripleType {
            prev: NodeType(0),
            edge_a: EdgeType(0),
            mid: NodeType(1),
            edge_b: EdgeType(0),
            next: NodeType(0),
        };
        assert!(eligible_starts(&empty, &tt).is_empty());
    }

    #[test]
    fn two_member_type_negatives() {
        let g = read_graph(
            "a\tA\nb\tA\nx\tB\n".as_bytes(),
            "n",
            "a\tx\tAB\nb\tx\tAB\n".as_bytes(),
            "e",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = g.node_by_label("a").unwrap();
        let b = g.node_by_label("b").unwrap();
        assert_eq!(negative_sample(&g, a, 5, &mut rng).unwrap(), vec![b; 5]);
        let x = g.node_by_label("x").unwrap();
        assert_eq!(
            negative_sample(&g, x, 5, &mut rng),
            Err(SampleError::SingletonType(x))
        );
        let deg = NegativeSampler::new(&g, NegDistribution::Degree75);
        assert_eq!(deg.sample(&g, b, 3, &mut rng).unwrap(), vec![a; 3]);
    }

    #[test]
    fn negatives_exclude_positive_and_match_type() {
        let mut b = crate::graph::GraphBuilder::new();
        for i in 0..100 {
            b.add_node(&format!("a{i}"), "A").unwrap();
        }
        b.add_node("x", "B").unwrap();
        let g = b.build();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dist in [NegDistribution::Uniform, NegDistribution::Degree75] {
            let ns = NegativeSampler::new(&g, dist);
            for p in 0..100 {
                let negs = ns.sample(&g, NodeId(p), 5, &mut rng).unwrap();
                assert_eq!(negs.len(), 5);
                assert!(negs
                    .iter()
                    .all(|&n| n != NodeId(p) && g.node_type(n) == NodeType(0)));
            }
        }
    }

    #[test]
    fn distribution_names_round_trip() {
        for d in [NegDistribution::Uniform, NegDistribution::Degree75] {
            assert_eq!(d.to_string().parse::<NegDistribution>().unwrap(), d);
        }
        assert!("zipf".parse::<NegDistribution>().is_err());
    }
}
