//! Symmetric meta-paths, their three-element decompositions, and automatic
//! selection of the initial meta-path set from a schema.
//!
//! A symmetric meta-path is a palindrome over the schema. Walking it
//! repeatedly (forward, then back, then forward again) yields a periodic type
//! sequence with period `l - 1`; the distinct length-3 windows of that
//! sequence form the path's [`TripleSet`]. Two meta-paths with equal triple
//! sets train exactly the same contexts, so selection works on triple sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::graph::{EdgeType, NodeType, Schema};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetaPathError {
    #[error("meta-path has {nodes} node types but {edges} edge types")]
    LengthMismatch { nodes: usize, edges: usize },
    #[error("meta-path needs at least {min} node types, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("edge type `{edge}` does not connect `{from}` and `{to}`")]
    NotInSchema {
        from: String,
        edge: String,
        to: String,
    },
    #[error("meta-path `{0}` is not symmetric")]
    NotSymmetric(String),
    #[error("unknown type name `{0}`")]
    UnknownType(String),
    #[error("no edge type connects `{0}` and `{1}`")]
    NoEdgeType(String, String),
    #[error("several edge types connect `{0}` and `{1}`; spell the edge types out")]
    AmbiguousEdgeType(String, String),
    #[error("malformed meta-path `{0}`")]
    Malformed(String),
    #[error("empty meta-path set")]
    Empty,
    #[error("meta-path `{0}` listed twice")]
    Duplicate(String),
}

/// A symmetric sequence of node types joined by edge types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetaPath {
    nodes: Vec<NodeType>,
    edges: Vec<EdgeType>,
    id: String,
}

fn path_id(schema: &Schema, nodes: &[NodeType], edges: &[EdgeType]) -> String {
    let mut id = String::from(schema.node_type_name(nodes[0]));
    for (e, n) in edges.iter().zip(&nodes[1..]) {
        id.push('[');
        id.push_str(schema.edge_type_name(*e));
        id.push(']');
        id.push_str(schema.node_type_name(*n));
    }
    id
}

impl MetaPath {
    /// Validates length consistency, schema membership and symmetry.
    pub fn new(
        schema: &Schema,
        nodes: Vec<NodeType>,
        edges: Vec<EdgeType>,
    ) -> Result<Self, MetaPathError> {
        if nodes.len() < 2 {
            return Err(MetaPathError::TooShort {
                min: 2,
                got: nodes.len(),
            });
        }
        if edges.len() + 1 != nodes.len() {
            return Err(MetaPathError::LengthMismatch {
                nodes: nodes.len(),
                edges: edges.len(),
            });
        }
        for (i, e) in edges.iter().enumerate() {
            if e.index() >= schema.edge_types().len()
                || !schema.edge_def(*e).connects(nodes[i], nodes[i + 1])
            {
                return Err(MetaPathError::NotInSchema {
                    from: schema.node_type_name(nodes[i]).to_string(),
                    edge: if e.index() < schema.edge_types().len() {
                        schema.edge_type_name(*e).to_string()
                    } else {
                        format!("#{}", e.0)
                    },
                    to: schema.node_type_name(nodes[i + 1]).to_string(),
                });
            }
        }
        let id = path_id(schema, &nodes, &edges);
        let palindrome = nodes.iter().eq(nodes.iter().rev()) && edges.iter().eq(edges.iter().rev());
        if !palindrome {
            return Err(MetaPathError::NotSymmetric(id));
        }
        Ok(MetaPath { nodes, edges, id })
    }

    /// Parses either the canonical form `U[UM]M[UM]U`, an alternating
    /// whitespace-separated list `U UM M UM U`, or bare node types `U M U`
    /// (edge types inferred when unique).
    pub fn parse(schema: &Schema, text: &str) -> Result<Self, MetaPathError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(MetaPathError::Malformed(text.to_string()));
        }
        let node = |name: &str| {
            schema
                .node_type(name)
                .ok_or_else(|| MetaPathError::UnknownType(name.to_string()))
        };
        let edge = |name: &str| {
            schema
                .edge_type(name)
                .ok_or_else(|| MetaPathError::UnknownType(name.to_string()))
        };

        let (nodes, edges) = if text.contains('[') {
            let mut nodes = Vec::new();
            let mut edges = Vec::new();
            let mut rest = text;
            loop {
                match rest.find('[') {
                    Some(open) => {
                        nodes.push(node(&rest[..open])?);
                        let close = rest[open..]
                            .find(']')
                            .map(|c| c + open)
                            .ok_or_else(|| MetaPathError::Malformed(text.to_string()))?;
                        edges.push(edge(&rest[open + 1..close])?);
                        rest = &rest[close + 1..];
                    }
                    None => {
                        nodes.push(node(rest)?);
                        break;
                    }
                }
            }
            (nodes, edges)
        } else {
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let alternating = tokens.len() % 2 == 1
                && tokens.len() >= 3
                && tokens
                    .iter()
                    .skip(1)
                    .step_by(2)
                    .all(|t| schema.edge_type(t).is_some())
                && tokens
                    .iter()
                    .step_by(2)
                    .all(|t| schema.node_type(t).is_some());
            if alternating {
                let nodes = tokens
                    .iter()
                    .step_by(2)
                    .map(|t| node(t))
                    .collect::<Result<Vec<_>, _>>()?;
                let edges = tokens
                    .iter()
                    .skip(1)
                    .step_by(2)
                    .map(|t| edge(t))
                    .collect::<Result<Vec<_>, _>>()?;
                (nodes, edges)
            } else {
                let nodes = tokens
                    .iter()
                    .map(|t| node(t))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut edges = Vec::with_capacity(nodes.len().saturating_sub(1));
                for w in nodes.windows(2) {
                    let mut between = schema.edge_types_between(w[0], w[1]);
                    let first = between.next().ok_or_else(|| {
                        MetaPathError::NoEdgeType(
                            schema.node_type_name(w[0]).to_string(),
                            schema.node_type_name(w[1]).to_string(),
                        )
                    })?;
                    if between.next().is_some() {
                        return Err(MetaPathError::AmbiguousEdgeType(
                            schema.node_type_name(w[0]).to_string(),
                            schema.node_type_name(w[1]).to_string(),
                        ));
                    }
                    edges.push(first);
                }
                (nodes, edges)
            }
        };
        MetaPath::new(schema, nodes, edges)
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.nodes
    }

    pub fn edge_types(&self) -> &[EdgeType] {
        &self.edges
    }

    /// Number of node types `l`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Canonical id: node-type names with edge-type names in brackets.
    pub fn id(&self) -> &str {
        &self.id
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Type of a three-element node sequence `prev -edge_a- mid -edge_b- next`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleType {
    pub prev: NodeType,
    pub edge_a: EdgeType,
    pub mid: NodeType,
    pub edge_b: EdgeType,
    pub next: NodeType,
}

impl TripleType {
    pub fn id(&self, schema: &Schema) -> String {
        format!(
            "{}[{}]{}[{}]{}",
            schema.node_type_name(self.prev),
            schema.edge_type_name(self.edge_a),
            schema.node_type_name(self.mid),
            schema.edge_type_name(self.edge_b),
            schema.node_type_name(self.next)
        )
    }
}

pub type TripleSet = BTreeSet<TripleType>;

/// All triple types met while walking `m` back and forth indefinitely.
///
/// ```
/// use mshine::graph::Schema;
/// use mshine::metapath::{decompose, MetaPath};
///
/// let imdb = Schema::new(&["U", "M", "A"], &[("UM", "U", "M"), ("MA", "M", "A")]).unwrap();
/// let umamu = MetaPath::parse(&imdb, "U M A M U").unwrap();
/// let triples: Vec<String> = decompose(&umamu).unwrap().iter().map(|t| t.id(&imdb)).collect();
/// assert_eq!(triples.len(), 4);
/// ```
pub fn decompose(m: &MetaPath) -> Result<TripleSet, MetaPathError> {
    if m.len() < 3 {
        return Err(MetaPathError::TooShort {
            min: 3,
            got: m.len(),
        });
    }
    // A palindrome ends on its start type, so the walk is periodic in l - 1.
    let period = m.len() - 1;
    let node = |i: usize| m.nodes[i % period];
    let edge = |i: usize| m.edges[i % period];
    Ok((0..period)
        .map(|i| TripleType {
            prev: node(i),
            edge_a: edge(i),
            mid: node(i + 1),
            edge_b: edge(i + 1),
            next: node(i + 2),
        })
        .collect())
}

fn mirror_odd(half_nodes: &[NodeType], half_edges: &[EdgeType]) -> (Vec<NodeType>, Vec<EdgeType>) {
    let mut nodes = half_nodes.to_vec();
    nodes.extend(half_nodes.iter().rev().skip(1));
    let mut edges = half_edges.to_vec();
    edges.extend(half_edges.iter().rev());
    (nodes, edges)
}

fn mirror_even(
    half_nodes: &[NodeType],
    half_edges: &[EdgeType],
    center: EdgeType,
) -> (Vec<NodeType>, Vec<EdgeType>) {
    let mut nodes = half_nodes.to_vec();
    nodes.extend(half_nodes.iter().rev());
    let mut edges = half_edges.to_vec();
    edges.push(center);
    edges.extend(half_edges.iter().rev());
    (nodes, edges)
}

/// Depth-first walk over half-paths, calling `visit` with `(nodes, edges)` for
/// every half-path of at least one node. `simple` restricts to half-paths with
/// no repeated node type.
fn for_each_half_path(
    schema: &Schema,
    max_edges: usize,
    simple: bool,
    visit: &mut dyn FnMut(&[NodeType], &[EdgeType]),
) {
    fn rec(
        schema: &Schema,
        max_edges: usize,
        simple: bool,
        nodes: &mut Vec<NodeType>,
        edges: &mut Vec<EdgeType>,
        visit: &mut dyn FnMut(&[NodeType], &[EdgeType]),
    ) {
        visit(nodes, edges);
        if edges.len() == max_edges {
            return;
        }
        let last = *nodes.last().unwrap();
        let steps: Vec<_> = schema.steps_from(last).collect();
        for (e, to) in steps {
            if simple && nodes.contains(&to) {
                continue;
            }
            nodes.push(to);
            edges.push(e);
            rec(schema, max_edges, simple, nodes, edges, visit);
            nodes.pop();
            edges.pop();
        }
    }
    for t in schema.node_types() {
        let mut nodes = vec![t];
        let mut edges = Vec::new();
        rec(schema, max_edges, simple, &mut nodes, &mut edges, visit);
    }
}

fn build_all(schema: &Schema, raw: Vec<(Vec<NodeType>, Vec<EdgeType>)>) -> Vec<MetaPath> {
    let mut out: BTreeMap<String, MetaPath> = BTreeMap::new();
    for (nodes, edges) in raw {
        let m =
            MetaPath::new(schema, nodes, edges).expect("mirrored half-paths are valid palindromes");
        out.entry(m.id.clone()).or_insert(m);
    }
    out.into_values().collect()
}

/// Every palindromic meta-path of at least three node types whose half-length
/// is at most `max_half_len` edges. A center self-relation counts as one
/// edge of the half.
pub fn enumerate_symmetric(schema: &Schema, max_half_len: usize) -> Vec<MetaPath> {
    let mut raw = Vec::new();
    for_each_half_path(schema, max_half_len, false, &mut |nodes, edges| {
        if !edges.is_empty() {
            raw.push(mirror_odd(nodes, edges));
        }
        if !edges.is_empty() && edges.len() < max_half_len {
            let last = *nodes.last().unwrap();
            for (e, to) in schema.steps_from(last) {
                if to == last {
                    raw.push(mirror_even(nodes, edges, e));
                }
            }
        }
    });
    build_all(schema, raw)
}

/// Candidate pool for initial selection: palindromes whose half-path visits
/// each node type at most once, centered on a node type or on a self-relation.
/// A bare self-relation `T-T` is represented by `T-T-T`, the shortest form
/// with a three-element window.
fn primitive_candidates(schema: &Schema, max_half_len: usize) -> Vec<MetaPath> {
    let mut raw = Vec::new();
    for_each_half_path(schema, max_half_len, true, &mut |nodes, edges| {
        if !edges.is_empty() {
            raw.push(mirror_odd(nodes, edges));
        }
        if edges.len() < max_half_len {
            let last = *nodes.last().unwrap();
            for (e, to) in schema.steps_from(last) {
                if to != last {
                    continue;
                }
                if edges.is_empty() {
                    raw.push((vec![last; 3], vec![e; 2]));
                } else {
                    raw.push(mirror_even(nodes, edges, e));
                }
            }
        }
    });
    build_all(schema, raw)
}

/// Default bound on half-length: one step per edge type plus a closing step.
pub fn default_max_half_len(schema: &Schema) -> usize {
    schema.edge_types().len() + 1
}

/// Initial meta-paths with the default half-length bound.
pub fn select_initial(schema: &Schema) -> Vec<MetaPath> {
    select_initial_with(schema, default_max_half_len(schema))
}

/// Applies the three selection criteria to the candidate pool:
/// symmetry, one representative (the shortest) per distinct triple set, and
/// removal of paths whose triple set is a proper subset of another's.
/// The result is sorted by canonical id.
pub fn select_initial_with(schema: &Schema, max_half_len: usize) -> Vec<MetaPath> {
    let mut candidates = primitive_candidates(schema, max_half_len);
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.id.cmp(&b.id)));

    let mut by_set: Vec<(TripleSet, MetaPath)> = Vec::new();
    for m in candidates {
        let set = decompose(&m).expect("candidates have at least three node types");
        if !by_set.iter().any(|(s, _)| *s == set) {
            by_set.push((set, m));
        }
    }

    let mut selected: Vec<MetaPath> = by_set
        .iter()
        .filter(|(set, _)| {
            !by_set
                .iter()
                .any(|(other, _)| other.len() > set.len() && set.is_subset(other))
        })
        .map(|(_, m)| m.clone())
        .collect();
    selected.sort_by(|a, b| a.id.cmp(&b.id));
    selected
}

/// Dense meta-path id (row of the decode-vector tables).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathId(pub u32);

/// Dense triple-type id (row of the relation-vector table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleId(pub u32);

impl PathId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TripleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index from triple types to the meta-paths that contain them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleIndex {
    types: Vec<TripleType>,
    paths_of: Vec<Vec<PathId>>,
    triples_of: Vec<Vec<TripleId>>,
}

impl TripleIndex {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn triple(&self, t: TripleId) -> &TripleType {
        &self.types[t.index()]
    }

    pub fn types(&self) -> &[TripleType] {
        &self.types
    }

    pub fn id_of(&self, t: &TripleType) -> Option<TripleId> {
        self.types.binary_search(t).ok().map(|i| TripleId(i as u32))
    }

    /// Meta-paths whose triple set contains `t`, in path order.
    pub fn paths_of(&self, t: TripleId) -> &[PathId] {
        &self.paths_of[t.index()]
    }

    /// Triple types of path `p` in canonical order.
    pub fn triples_of(&self, p: PathId) -> &[TripleId] {
        &self.triples_of[p.index()]
    }
}

/// Maps each triple type of each path to the paths containing it. Triple ids
/// follow the sorted order of triple types.
pub fn triple_types_of(paths: &[MetaPath]) -> Result<TripleIndex, MetaPathError> {
    let sets = paths.iter().map(decompose).collect::<Result<Vec<_>, _>>()?;
    let types: Vec<TripleType> = sets
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut paths_of = vec![Vec::new(); types.len()];
    let mut triples_of = Vec::with_capacity(sets.len());
    for (p, set) in sets.iter().enumerate() {
        let ids: Vec<TripleId> = set
            .iter()
            .map(|t| TripleId(types.binary_search(t).expect("collected above") as u32))
            .collect();
        for t in &ids {
            paths_of[t.index()].push(PathId(p as u32));
        }
        triples_of.push(ids);
    }
    Ok(TripleIndex {
        types,
        paths_of,
        triples_of,
    })
}

/// The meta-paths chosen for training together with their triple index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPathSet {
    paths: Vec<MetaPath>,
    index: TripleIndex,
}

impl MetaPathSet {
    pub fn new(paths: Vec<MetaPath>) -> Result<Self, MetaPathError> {
        if paths.is_empty() {
            return Err(MetaPathError::Empty);
        }
        let mut seen = BTreeSet::new();
        for p in &paths {
            if !seen.insert(p.id()) {
                return Err(MetaPathError::Duplicate(p.id().to_string()));
            }
        }
        let index = triple_types_of(&paths)?;
        Ok(MetaPathSet { paths, index })
    }

    /// Parses one meta-path per line; blank lines and `#` comments are skipped.
    pub fn parse(schema: &Schema, text: &str) -> Result<Self, MetaPathError> {
        let paths = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| MetaPath::parse(schema, l))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(paths)
    }

    pub fn paths(&self) -> &[MetaPath] {
        &self.paths
    }

    pub fn path(&self, p: PathId) -> &MetaPath {
        &self.paths[p.index()]
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn index(&self) -> &TripleIndex {
        &self.index
    }

    pub fn position(&self, id: &str) -> Option<PathId> {
        self.paths
            .iter()
            .position(|p| p.id() == id)
            .map(|i| PathId(i as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imdb() -> Schema {
        Schema::new(
            &["U", "M", "A", "G", "D"],
            &[
                ("UM", "U", "M"),
                ("AM", "A", "M"),
                ("DM", "D", "M"),
                ("GM", "G", "M"),
            ],
        )
        .unwrap()
    }

    fn cora() -> Schema {
        Schema::new(
            &["P", "T", "A"],
            &[("PP", "P", "P"), ("PT", "P", "T"), ("PA", "P", "A")],
        )
        .unwrap()
    }

    fn names(schema: &Schema, set: &TripleSet) -> BTreeSet<String> {
        set.iter()
            .map(|t| {
                [t.prev, t.mid, t.next]
                    .iter()
                    .map(|&n| schema.node_type_name(n))
                    .collect::<Vec<_>>()
                    .join("")
            })
            .collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn decompose_umamu() {
        let s = imdb();
        let m = MetaPath::parse(&s, "U M A M U").unwrap();
        assert_eq!(
            names(&s, &decompose(&m).unwrap()),
            set(&["UMA", "MAM", "AMU", "MUM"])
        );
    }

    #[test]
    fn decompose_single_edge_type() {
        let s = Schema::new(&["A", "P"], &[("AP", "A", "P")]).unwrap();
        let m = MetaPath::parse(&s, "A P A").unwrap();
        assert_eq!(names(&s, &decompose(&m).unwrap()), set(&["APA", "PAP"]));
    }

    #[test]
    fn decompose_self_relation() {
        let s = cora();
        let m = MetaPath::parse(&s, "P P P").unwrap();
        assert_eq!(names(&s, &decompose(&m).unwrap()), set(&["PPP"]));
    }

    #[test]
    fn decompose_rejects_short_paths() {
        let s = cora();
        let m = MetaPath::parse(&s, "P P").unwrap();
        assert_eq!(
            decompose(&m),
            Err(MetaPathError::TooShort { min: 3, got: 2 })
        );
    }

    #[test]
    fn asymmetric_path_rejected() {
        let s = imdb();
        assert!(matches!(
            MetaPath::parse(&s, "U M A"),
            Err(MetaPathError::NotSymmetric(_))
        ));
    }

    #[test]
    fn parse_forms_agree() {
        let s = imdb();
        let a = MetaPath::parse(&s, "U M A M U").unwrap();
        let b = MetaPath::parse(&s, "U UM M AM A AM M UM U").unwrap();
        let c = MetaPath::parse(&s, a.id()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.id(), "U[UM]M[AM]A[AM]M[UM]U");
    }

    #[test]
    fn parse_rejects_non_schema_steps() {
        let s = imdb();
        assert!(matches!(
            MetaPath::parse(&s, "U A U"),
            Err(MetaPathError::NoEdgeType(..))
        ));
        assert!(matches!(
            MetaPath::parse(&s, "U X U"),
            Err(MetaPathError::UnknownType(_))
        ));
    }

    #[test]
    fn ambiguous_edge_types_need_spelling_out() {
        let s = Schema::new(&["U", "M"], &[("RATED", "U", "M"), ("LIKED", "U", "M")]).unwrap();
        assert!(matches!(
            MetaPath::parse(&s, "U M U"),
            Err(MetaPathError::AmbiguousEdgeType(..))
        ));
        let m = MetaPath::parse(&s, "U RATED M LIKED U");
        // not a palindrome in edge types
        assert!(matches!(m, Err(MetaPathError::NotSymmetric(_))));
        assert!(MetaPath::parse(&s, "U LIKED M LIKED U").is_ok());
    }

    #[test]
    fn enumerate_imdb_contains_expected() {
        let s = imdb();
        let ids: BTreeSet<String> = enumerate_symmetric(&s, 2)
            .iter()
            .map(|m| m.id().to_string())
            .collect();
        for expected in ["U M U", "M A M", "U M A M U"] {
            let m = MetaPath::parse(&s, expected).unwrap();
            assert!(ids.contains(m.id()), "missing {expected}");
        }
        for m in enumerate_symmetric(&s, 2) {
            assert!(m.len() <= 5);
        }
    }

    #[test]
    fn enumerate_empty_schema() {
        let s = Schema::new(&["P"], &[]).unwrap();
        assert!(enumerate_symmetric(&s, 3).is_empty());
        assert!(select_initial(&s).is_empty());
    }

    #[test]
    fn enumerate_cora_has_self_relation() {
        let s = cora();
        let ppp = MetaPath::parse(&s, "P P P").unwrap();
        assert!(enumerate_symmetric(&s, 2).contains(&ppp));
        // center self-relation: A P P A
        let appa = MetaPath::parse(&s, "A P P A").unwrap();
        assert!(enumerate_symmetric(&s, 2).contains(&appa));
        assert!(!enumerate_symmetric(&s, 1).contains(&appa));
    }

    #[test]
    fn enumerate_is_exhaustive_against_brute_force() {
        // Brute force: all type/edge sequences of length <= 5 that are palindromes.
        let s = cora();
        let mut brute = BTreeSet::new();
        let steps: Vec<Vec<(EdgeType, NodeType)>> =
            s.node_types().map(|t| s.steps_from(t).collect()).collect();
        let mut frontier: Vec<(Vec<NodeType>, Vec<EdgeType>)> =
            s.node_types().map(|t| (vec![t], vec![])).collect();
        for _ in 0..4 {
            let mut next = Vec::new();
            for (nodes, edges) in &frontier {
                for &(e, to) in &steps[nodes.last().unwrap().index()] {
                    let mut n = nodes.clone();
                    n.push(to);
                    let mut es = edges.clone();
                    es.push(e);
                    if let Ok(m) = MetaPath::new(&s, n.clone(), es.clone()) {
                        if m.len() >= 3 {
                            brute.insert(m.id().to_string());
                        }
                    }
                    next.push((n, es));
                }
            }
            frontier = next;
        }
        let got: BTreeSet<String> = enumerate_symmetric(&s, 2)
            .iter()
            .map(|m| m.id().to_string())
            .collect();
        assert_eq!(got, brute);
    }

    #[test]
    fn triple_index_single_path() {
        let s = imdb();
        let m = MetaPath::parse(&s, "U M A M U").unwrap();
        let idx = triple_types_of(&[m]).unwrap();
        assert_eq!(idx.len(), 4);
        for t in 0..4 {
            assert_eq!(idx.paths_of(TripleId(t)), &[PathId(0)]);
        }
    }

    #[test]
    fn triple_index_shared_triple() {
        let s = imdb();
        let a = MetaPath::parse(&s, "U M A M U").unwrap();
        let b = MetaPath::parse(&s, "M U M").unwrap();
        let idx = triple_types_of(&[a, b]).unwrap();
        let mum = TripleType {
            prev: s.node_type("M").unwrap(),
            edge_a: s.edge_type("UM").unwrap(),
            mid: s.node_type("U").unwrap(),
            edge_b: s.edge_type("UM").unwrap(),
            next: s.node_type("M").unwrap(),
        };
        let id = idx.id_of(&mum).unwrap();
        assert_eq!(idx.paths_of(id), &[PathId(0), PathId(1)]);
    }

    #[test]
    fn triple_index_empty() {
        assert!(triple_types_of(&[]).unwrap().is_empty());
        assert_eq!(MetaPathSet::new(vec![]), Err(MetaPathError::Empty));
    }

    #[test]
    fn select_is_deterministic_and_sorted() {
        let s = cora();
        let a = select_initial(&s);
        let b = select_initial(&s);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].id() < w[1].id()));
    }

    #[test]
    fn metapath_file_parsing() {
        let s = imdb();
        let set = MetaPathSet::parse(&s, "# custom\nU M U\n\nU M A M U\n").unwrap();
        assert_eq!(set.len(), 2);
        assert!(matches!(
            MetaPathSet::parse(&s, "U M U\nU M U\n"),
            Err(MetaPathError::Duplicate(_))
        ));
        assert!(MetaPathSet::parse(&s, "U M U\nU A U\n").is_err());
    }
}

#[cfg(test)]
mod selection_counts {
    use super::*;

    #[test]
    fn yelp_selection() {
        let s = Schema::new(
            &["Ca", "Ci", "B", "U"],
            &[
                ("CaB", "Ca", "B"),
                ("CiB", "Ci", "B"),
                ("BU", "B", "U"),
                ("UU", "U", "U"),
            ],
        )
        .unwrap();
        let ids: Vec<String> = select_initial(&s)
            .iter()
            .map(|m| m.id().to_string())
            .collect();
        assert_eq!(ids.len(), 10, "{ids:#?}");
        let with_bound_3 = select_initial_with(&s, 3);
        assert_eq!(with_bound_3.len(), 10);
    }
}
