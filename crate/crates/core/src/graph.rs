//! Typed undirected multigraphs and their schemas.
//!
//! A [`TypedGraph`] stores dense node ids, one node type per node and a set
//! of undirected typed edges. Adjacency is indexed per `(node, neighbor type)`
//! so that meta-path-constrained walks can draw a neighbor in constant time.
//! Within a bucket, entries are ordered by `(edge type, neighbor)`, which makes
//! the sub-range for a single edge type contiguous.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Dense node id in `0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Dense node-type id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeType(pub u16);

/// Dense edge-type id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeType(pub u16);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NodeType {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeType {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}:{line}: edge references unknown node `{label}`")]
    UnknownNode {
        file: String,
        line: usize,
        label: String,
    },
    #[error(
        "{file}:{line}: edge type `{edge_type}` connects {found}, but earlier edges of this type connect {expected}"
    )]
    InconsistentEdgeType {
        file: String,
        line: usize,
        edge_type: String,
        expected: String,
        found: String,
    },
    #[error("{file}:{line}: node `{label}` declared twice with different types")]
    ConflictingNodeType {
        file: String,
        line: usize,
        label: String,
    },
    #[error(
        "invalid type name `{0}`: names must be non-empty and contain no whitespace, `[` or `]`"
    )]
    InvalidTypeName(String),
    #[error("unknown node type `{0}`")]
    UnknownNodeType(String),
    #[error("unknown edge type `{0}`")]
    UnknownEdgeType(String),
    #[error("too many {0} for the id width")]
    Overflow(&'static str),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn check_type_name(name: &str) -> Result<(), GraphError> {
    if name.is_empty()
        || name
            .chars()
            .any(|c| c.is_whitespace() || c == '[' || c == ']')
    {
        return Err(GraphError::InvalidTypeName(name.to_string()));
    }
    Ok(())
}

/// Declared endpoints of an edge type. The pair is unordered; `ends.0` is the
/// type seen in the source column of the first edge of this type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeTypeDef {
    pub name: String,
    pub ends: (NodeType, NodeType),
}

impl EdgeTypeDef {
    pub fn is_self_pair(&self) -> bool {
        self.ends.0 == self.ends.1
    }

    /// The opposite endpoint type when leaving from `from`, if this edge type touches it.
    pub fn other_end(&self, from: NodeType) -> Option<NodeType> {
        if self.ends.0 == from {
            Some(self.ends.1)
        } else if self.ends.1 == from {
            Some(self.ends.0)
        } else {
            None
        }
    }

    pub fn connects(&self, a: NodeType, b: NodeType) -> bool {
        (self.ends.0 == a && self.ends.1 == b) || (self.ends.0 == b && self.ends.1 == a)
    }
}

/// The type-level template of a graph: node types and the edge types between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    node_types: Vec<String>,
    edge_types: Vec<EdgeTypeDef>,
}

impl Schema {
    /// Builds a schema from type names and `(edge name, end a, end b)` triples.
    ///
    /// ```
    /// use mshine::graph::Schema;
    ///
    /// let dblp = Schema::new(
    ///     &["P", "A", "V", "T"],
    ///     &[("PA", "P", "A"), ("PV", "P", "V"), ("PT", "P", "T")],
    /// )
    /// .unwrap();
    /// assert_eq!(dblp.edge_types().len(), 3);
    /// ```
    pub fn new(node_types: &[&str], edge_types: &[(&str, &str, &str)]) -> Result<Self, GraphError> {
        let mut schema = Schema {
            node_types: Vec::new(),
            edge_types: Vec::new(),
        };
        for name in node_types {
            check_type_name(name)?;
            if schema.node_type(name).is_none() {
                schema.node_types.push(name.to_string());
            }
        }
        for (name, a, b) in edge_types {
            check_type_name(name)?;
            let a = schema
                .node_type(a)
                .ok_or_else(|| GraphError::UnknownNodeType(a.to_string()))?;
            let b = schema
                .node_type(b)
                .ok_or_else(|| GraphError::UnknownNodeType(b.to_string()))?;
            if schema.edge_type(name).is_some() {
                continue;
            }
            schema.edge_types.push(EdgeTypeDef {
                name: name.to_string(),
                ends: (a, b),
            });
        }
        Ok(schema)
    }

    pub fn node_types(&self) -> impl ExactSizeIterator<Item = NodeType> + '_ {
        (0..self.node_types.len()).map(|i| NodeType(i as u16))
    }

    pub fn edge_types(&self) -> &[EdgeTypeDef] {
        &self.edge_types
    }

    pub fn num_node_types(&self) -> usize {
        self.node_types.len()
    }

    pub fn node_type(&self, name: &str) -> Option<NodeType> {
        self.node_types
            .iter()
            .position(|n| n == name)
            .map(|i| NodeType(i as u16))
    }

    pub fn edge_type(&self, name: &str) -> Option<EdgeType> {
        self.edge_types
            .iter()
            .position(|e| e.name == name)
            .map(|i| EdgeType(i as u16))
    }

    pub fn node_type_name(&self, t: NodeType) -> &str {
        &self.node_types[t.index()]
    }

    pub fn edge_type_name(&self, e: EdgeType) -> &str {
        &self.edge_types[e.index()].name
    }

    pub fn edge_def(&self, e: EdgeType) -> &EdgeTypeDef {
        &self.edge_types[e.index()]
    }

    /// Edge types that connect `a` and `b`, in id order.
    pub fn edge_types_between(
        &self,
        a: NodeType,
        b: NodeType,
    ) -> impl Iterator<Item = EdgeType> + '_ {
        self.edge_types
            .iter()
            .enumerate()
            .filter(move |(_, d)| d.connects(a, b))
            .map(|(i, _)| EdgeType(i as u16))
    }

    /// One-step moves out of node type `from`: `(edge type, reached type)`.
    /// A self-pair edge type yields a single move back to `from`.
    pub fn steps_from(&self, from: NodeType) -> impl Iterator<Item = (EdgeType, NodeType)> + '_ {
        self.edge_types
            .iter()
            .enumerate()
            .filter_map(move |(i, d)| d.other_end(from).map(|to| (EdgeType(i as u16), to)))
    }
}

/// Validated, immutable typed graph.
#[derive(Debug, Clone)]
pub struct TypedGraph {
    schema: Schema,
    labels: Vec<String>,
    label_index: HashMap<String, NodeId>,
    node_type: Vec<NodeType>,
    edges: Vec<(NodeId, NodeId, EdgeType)>,
    nodes_by_type: Vec<Vec<NodeId>>,
    rank_in_type: Vec<u32>,
    // CSR over (node, neighbor type) buckets.
    bucket_offsets: Vec<usize>,
    adjacency: Vec<(NodeId, EdgeType)>,
}

/// Incremental graph construction with the same validation as file loading.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    node_types: Vec<String>,
    edge_types: Vec<EdgeTypeDef>,
    labels: Vec<String>,
    label_index: HashMap<String, NodeId>,
    node_type: Vec<NodeType>,
    edges: Vec<(NodeId, NodeId, EdgeType)>,
    seen: HashSet<(NodeId, NodeId, EdgeType)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_node_type(&mut self, name: &str) -> Result<NodeType, GraphError> {
        if let Some(i) = self.node_types.iter().position(|n| n == name) {
            return Ok(NodeType(i as u16));
        }
        check_type_name(name)?;
        let id =
            u16::try_from(self.node_types.len()).map_err(|_| GraphError::Overflow("node types"))?;
        self.node_types.push(name.to_string());
        Ok(NodeType(id))
    }

    /// Adds a node; re-declaring a label with the same type is a no-op.
    pub fn add_node(&mut self, label: &str, type_name: &str) -> Result<NodeId, GraphError> {
        let t = self.intern_node_type(type_name)?;
        if let Some(&id) = self.label_index.get(label) {
            if self.node_type[id.index()] != t {
                return Err(GraphError::ConflictingNodeType {
                    file: String::new(),
                    line: 0,
                    label: label.to_string(),
                });
            }
            return Ok(id);
        }
        let id =
            NodeId(u32::try_from(self.labels.len()).map_err(|_| GraphError::Overflow("nodes"))?);
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), id);
        self.node_type.push(t);
        Ok(id)
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.label_index.get(label).copied()
    }

    /// Adds an undirected edge. Returns `false` if it duplicates an earlier edge.
    pub fn add_edge(&mut self, src: &str, dst: &str, edge_type: &str) -> Result<bool, GraphError> {
        let u = self.node(src).ok_or_else(|| GraphError::UnknownNode {
            file: String::new(),
            line: 0,
            label: src.to_string(),
        })?;
        let v = self.node(dst).ok_or_else(|| GraphError::UnknownNode {
            file: String::new(),
            line: 0,
            label: dst.to_string(),
        })?;
        self.add_edge_ids(u, v, edge_type)
    }

    pub fn add_edge_ids(
        &mut self,
        u: NodeId,
        v: NodeId,
        edge_type: &str,
    ) -> Result<bool, GraphError> {
        let (tu, tv) = (self.node_type[u.index()], self.node_type[v.index()]);
        let e = match self.edge_types.iter().position(|d| d.name == edge_type) {
            Some(i) => {
                let def = &self.edge_types[i];
                if !def.connects(tu, tv) {
                    return Err(GraphError::InconsistentEdgeType {
                        file: String::new(),
                        line: 0,
                        edge_type: edge_type.to_string(),
                        expected: format!(
                            "{}-{}",
                            self.node_types[def.ends.0.index()],
                            self.node_types[def.ends.1.index()]
                        ),
                        found: format!(
                            "{}-{}",
                            self.node_types[tu.index()],
                            self.node_types[tv.index()]
                        ),
                    });
                }
                EdgeType(i as u16)
            }
            None => {
                check_type_name(edge_type)?;
                let id = u16::try_from(self.edge_types.len())
                    .map_err(|_| GraphError::Overflow("edge types"))?;
                self.edge_types.push(EdgeTypeDef {
                    name: edge_type.to_string(),
                    ends: (tu, tv),
                });
                EdgeType(id)
            }
        };
        let key = (u.min(v), u.max(v), e);
        if !self.seen.insert(key) {
            return Ok(false);
        }
        self.edges.push((u, v, e));
        Ok(true)
    }

    pub fn build(self) -> TypedGraph {
        let n = self.labels.len();
        let num_types = self.node_types.len();
        let mut nodes_by_type = vec![Vec::new(); num_types];
        let mut rank_in_type = vec![0u32; n];
        for (i, t) in self.node_type.iter().enumerate() {
            rank_in_type[i] = nodes_by_type[t.index()].len() as u32;
            nodes_by_type[t.index()].push(NodeId(i as u32));
        }

        let bucket = |v: NodeId, t: NodeType| v.index() * num_types + t.index();
        let mut counts = vec![0usize; n * num_types + 1];
        for &(u, v, _) in &self.edges {
            counts[bucket(u, self.node_type[v.index()]) + 1] += 1;
            if u != v {
                counts[bucket(v, self.node_type[u.index()]) + 1] += 1;
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let bucket_offsets = counts;
        let mut fill = bucket_offsets.clone();
        let mut adjacency = vec![(NodeId(0), EdgeType(0)); *bucket_offsets.last().unwrap_or(&0)];
        for &(u, v, e) in &self.edges {
            let b = bucket(u, self.node_type[v.index()]);
            adjacency[fill[b]] = (v, e);
            fill[b] += 1;
            if u != v {
                let b = bucket(v, self.node_type[u.index()]);
                adjacency[fill[b]] = (u, e);
                fill[b] += 1;
            }
        }
        for b in 0..n * num_types {
            adjacency[bucket_offsets[b]..bucket_offsets[b + 1]]
                .sort_unstable_by_key(|&(w, e)| (e, w));
        }

        TypedGraph {
            schema: Schema {
                node_types: self.node_types,
                edge_types: self.edge_types,
            },
            labels: self.labels,
            label_index: self.label_index,
            node_type: self.node_type,
            edges: self.edges,
            nodes_by_type,
            rank_in_type,
            bucket_offsets,
            adjacency,
        }
    }
}

fn with_location(err: GraphError, file: &str, line_no: usize) -> GraphError {
    match err {
        GraphError::UnknownNode { label, .. } => GraphError::UnknownNode {
            file: file.to_string(),
            line: line_no,
            label,
        },
        GraphError::InconsistentEdgeType {
            edge_type,
            expected,
            found,
            ..
        } => GraphError::InconsistentEdgeType {
            file: file.to_string(),
            line: line_no,
            edge_type,
            expected,
            found,
        },
        GraphError::ConflictingNodeType { label, .. } => GraphError::ConflictingNodeType {
            file: file.to_string(),
            line: line_no,
            label,
        },
        GraphError::InvalidTypeName(name) => GraphError::Malformed {
            file: file.to_string(),
            line: line_no,
            message: format!("invalid type name `{name}`"),
        },
        other => other,
    }
}

/// Yields `(1-based line number, tab-separated fields)` for every data line.
pub(crate) fn data_lines<'a, R: BufRead + 'a>(
    reader: R,
    file: &'a str,
) -> impl Iterator<Item = Result<(usize, Vec<String>), GraphError>> + 'a {
    reader.lines().enumerate().filter_map(move |(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(source) => {
                return Some(Err(GraphError::Io {
                    path: PathBuf::from(file),
                    source,
                }))
            }
        };
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some(Ok((
            line_no,
            trimmed.split('\t').map(str::to_string).collect(),
        )))
    })
}

fn open(path: &Path) -> Result<BufReader<File>, GraphError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Loads a graph from a node file (`label<TAB>type`) and an edge file
/// (`src<TAB>dst<TAB>edge_type`).
pub fn load_graph(node_file: &Path, edge_file: &Path) -> Result<TypedGraph, GraphError> {
    let nodes = open(node_file)?;
    let edges = open(edge_file)?;
    read_graph(
        nodes,
        &node_file.display().to_string(),
        edges,
        &edge_file.display().to_string(),
    )
}

/// Reader-based variant of [`load_graph`]; the names are used in error messages.
pub fn read_graph<N: Read, E: Read>(
    nodes: N,
    node_name: &str,
    edges: E,
    edge_name: &str,
) -> Result<TypedGraph, GraphError> {
    let mut builder = GraphBuilder::new();
    for item in data_lines(BufReader::new(nodes), node_name) {
        let (line_no, fields) = item?;
        if fields.len() != 2 || fields[0].is_empty() {
            return Err(GraphError::Malformed {
                file: node_name.to_string(),
                line: line_no,
                message: format!(
                    "expected `<label>\\t<node_type>`, found {} field(s)",
                    fields.len()
                ),
            });
        }
        builder
            .add_node(&fields[0], &fields[1])
            .map_err(|e| with_location(e, node_name, line_no))?;
    }
    let mut duplicates = 0usize;
    for item in data_lines(BufReader::new(edges), edge_name) {
        let (line_no, fields) = item?;
        if fields.len() != 3 {
            return Err(GraphError::Malformed {
                file: edge_name.to_string(),
                line: line_no,
                message: format!(
                    "expected `<src>\\t<dst>\\t<edge_type>`, found {} field(s)",
                    fields.len()
                ),
            });
        }
        let fresh = builder
            .add_edge(&fields[0], &fields[1], &fields[2])
            .map_err(|e| with_location(e, edge_name, line_no))?;
        if !fresh {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        log::info!("{edge_name}: dropped {duplicates} duplicate edge(s)");
    }
    Ok(builder.build())
}

impl TypedGraph {
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_type(&self, v: NodeId) -> NodeType {
        self.node_type[v.index()]
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.label_index.get(label).copied()
    }

    /// Edges in first-seen order, as `(src, dst, edge type)`.
    pub fn edges(&self) -> &[(NodeId, NodeId, EdgeType)] {
        &self.edges
    }

    pub fn nodes_of_type(&self, t: NodeType) -> &[NodeId] {
        self.nodes_by_type.get(t.index()).map_or(&[], Vec::as_slice)
    }

    /// Position of `v` inside [`Self::nodes_of_type`] for its own type.
    pub fn rank_in_type(&self, v: NodeId) -> usize {
        self.rank_in_type[v.index()] as usize
    }

    fn bucket(&self, v: NodeId, t: NodeType) -> &[(NodeId, EdgeType)] {
        let b = v.index() * self.schema.num_node_types() + t.index();
        &self.adjacency[self.bucket_offsets[b]..self.bucket_offsets[b + 1]]
    }

    /// Neighbors of `v` whose node type is `t`, as `(neighbor, edge type)`,
    /// sorted by edge type then neighbor id.
    pub fn neighbors_by_type(
        &self,
        v: NodeId,
        t: NodeType,
    ) -> Result<&[(NodeId, EdgeType)], GraphError> {
        if t.index() >= self.schema.num_node_types() {
            return Err(GraphError::UnknownNodeType(format!("#{}", t.0)));
        }
        Ok(self.bucket(v, t))
    }

    /// Neighbors of `v` of type `t` reached through edges of type `e`.
    pub fn neighbors_via(&self, v: NodeId, t: NodeType, e: EdgeType) -> &[(NodeId, EdgeType)] {
        if t.index() >= self.schema.num_node_types() {
            return &[];
        }
        let all = self.bucket(v, t);
        let lo = all.partition_point(|&(_, et)| et < e);
        let hi = all.partition_point(|&(_, et)| et <= e);
        &all[lo..hi]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        let k = self.schema.num_node_types();
        let b = v.index() * k;
        self.bucket_offsets[b + k] - self.bucket_offsets[b]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId, e: EdgeType) -> bool {
        self.neighbors_via(u, self.node_type(v), e)
            .binary_search_by_key(&(e, v), |&(w, et)| (et, w))
            .is_ok()
    }

    /// Writes the node and edge files in the same format [`load_graph`] reads.
    pub fn write_files<N: Write, E: Write>(
        &self,
        mut nodes: N,
        mut edges: E,
    ) -> std::io::Result<()> {
        for (i, label) in self.labels.iter().enumerate() {
            writeln!(
                nodes,
                "{}\t{}",
                label,
                self.schema.node_type_name(self.node_type[i])
            )?;
        }
        for &(u, v, e) in &self.edges {
            writeln!(
                edges,
                "{}\t{}\t{}",
                self.labels[u.index()],
                self.labels[v.index()],
                self.schema.edge_type_name(e)
            )?;
        }
        Ok(())
    }
}

/// Reads an edge list in the edge-file format, resolving labels and types
/// against `g` (for held-out edges). Endpoint types must match the edge type.
pub fn read_edge_list<R: Read>(
    g: &TypedGraph,
    reader: R,
    name: &str,
) -> Result<Vec<(NodeId, NodeId, EdgeType)>, GraphError> {
    let mut out = Vec::new();
    for item in data_lines(BufReader::new(reader), name) {
        let (line_no, fields) = item?;
        let malformed = |message: String| GraphError::Malformed {
            file: name.to_string(),
            line: line_no,
            message,
        };
        if fields.len() != 3 {
            return Err(malformed(format!(
                "expected `<src>\\t<dst>\\t<edge_type>`, found {} field(s)",
                fields.len()
            )));
        }
        let node = |label: &str| {
            g.node_by_label(label)
                .ok_or_else(|| GraphError::UnknownNode {
                    file: name.to_string(),
                    line: line_no,
                    label: label.to_string(),
                })
        };
        let (u, v) = (node(&fields[0])?, node(&fields[1])?);
        let e = g
            .schema
            .edge_type(&fields[2])
            .ok_or_else(|| malformed(format!("unknown edge type `{}`", fields[2])))?;
        if !g
            .schema
            .edge_def(e)
            .connects(g.node_type(u), g.node_type(v))
        {
            return Err(malformed(format!(
                "edge type `{}` cannot connect `{}` and `{}`",
                fields[2], fields[0], fields[1]
            )));
        }
        out.push((u, v, e));
    }
    Ok(out)
}

/// The schema of a loaded graph. Every registered type is present in the
/// graph: node types are interned from nodes and edge types from edges.
pub fn schema_of(g: &TypedGraph) -> Schema {
    g.schema.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(nodes: &str, edges: &str) -> Result<TypedGraph, GraphError> {
        read_graph(nodes.as_bytes(), "nodes", edges.as_bytes(), "edges")
    }

    #[test]
    fn minimal_graph() {
        let g = load("u1\tU\nm1\tM\n", "u1\tm1\tUM\n").unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        let s = schema_of(&g);
        assert_eq!(s.num_node_types(), 2);
        assert_eq!(s.edge_types().len(), 1);
        let um = &s.edge_types()[0];
        assert_eq!(um.name, "UM");
        assert!(um.connects(s.node_type("U").unwrap(), s.node_type("M").unwrap()));
    }

    #[test]
    fn unknown_node_reports_line() {
        let err = load(
            "u1\tU\nm1\tM\n",
            "# header comment\nu1\tm1\tUM\nu1\tm9\tUM\n",
        )
        .unwrap_err();
        match err {
            GraphError::UnknownNode { line, label, .. } => {
                assert_eq!(line, 3);
                assert_eq!(label, "m9");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn malformed_line_reports_line() {
        let err = load("u1\tU\nm1 M\n", "").unwrap_err();
        assert!(
            matches!(err, GraphError::Malformed { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn inconsistent_edge_type() {
        let err = load("u1\tU\nm1\tM\na1\tA\n", "u1\tm1\tX\nm1\ta1\tX\n").unwrap_err();
        assert!(
            matches!(err, GraphError::InconsistentEdgeType { line: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn reversed_endpoints_are_consistent() {
        let g = load("u1\tU\nm1\tM\nu2\tU\n", "u1\tm1\tUM\nm1\tu2\tUM\n").unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn duplicates_are_dropped() {
        let g = load("a\tP\nb\tP\n", "a\tb\tPP\nb\ta\tPP\na\tb\tPP\n").unwrap();
        assert_eq!(g.num_edges(), 1);
        let p = g.schema().node_type("P").unwrap();
        assert_eq!(g.neighbors_by_type(NodeId(0), p).unwrap().len(), 1);
    }

    #[test]
    fn multi_edges_with_distinct_types_are_kept() {
        let g = load("u\tU\nm\tM\n", "u\tm\tRATED\nu\tm\tLIKED\n").unwrap();
        assert_eq!(g.num_edges(), 2);
        let m = g.schema().node_type("M").unwrap();
        let rated = g.schema().edge_type("RATED").unwrap();
        assert_eq!(g.neighbors_by_type(NodeId(0), m).unwrap().len(), 2);
        assert_eq!(g.neighbors_via(NodeId(0), m, rated), &[(NodeId(1), rated)]);
    }

    #[test]
    fn single_node_graph_schema() {
        let g = load("p\tP\n", "").unwrap();
        let s = schema_of(&g);
        assert_eq!(s.num_node_types(), 1);
        assert!(s.edge_types().is_empty());
        assert!(g
            .neighbors_by_type(NodeId(0), NodeType(0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_node_type_query() {
        let g = load("p\tP\n", "").unwrap();
        assert!(g.neighbors_by_type(NodeId(0), NodeType(7)).is_err());
    }

    #[test]
    fn path_graph_middle_node() {
        // a(A) - b(B) - c(C)
        let g = load("a\tA\nb\tB\nc\tC\n", "a\tb\tAB\nb\tc\tBC\n").unwrap();
        let b = g.node_by_label("b").unwrap();
        let s = g.schema();
        for (label, ty) in [("a", "A"), ("c", "C")] {
            let t = s.node_type(ty).unwrap();
            let expected: Vec<NodeId> = g
                .edges()
                .iter()
                .filter_map(|&(u, v, _)| {
                    if u == b && g.node_type(v) == t {
                        Some(v)
                    } else if v == b && g.node_type(u) == t {
                        Some(u)
                    } else {
                        None
                    }
                })
                .collect();
            let got: Vec<NodeId> = g
                .neighbors_by_type(b, t)
                .unwrap()
                .iter()
                .map(|p| p.0)
                .collect();
            assert_eq!(got, expected);
            assert_eq!(got, vec![g.node_by_label(label).unwrap()]);
        }
        assert!(g
            .neighbors_by_type(b, s.node_type("B").unwrap())
            .unwrap()
            .is_empty());
        assert_eq!(g.degree(b), 2);
    }

    #[test]
    fn invalid_type_names_rejected() {
        assert!(load("a\tP Q\n", "").is_err());
        assert!(Schema::new(&["P[1]"], &[]).is_err());
    }
}
