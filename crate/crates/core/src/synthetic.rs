//! A small planted bibliographic network for end-to-end checks.
//!
//! Two communities of four teams each. A team is five authors who write two
//! papers together; every paper appears at its community's venue and carries
//! its community's term. That gives 40 authors, 16 papers, 2 venues and
//! 2 terms (60 nodes). Authors are labeled with their community. A tenth of
//! the paper-author edges is held out, never two from the same paper or
//! author, so each held-out author still reaches the paper through the
//! sibling paper of the same team.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eval::NodeLabels;
use crate::graph::{EdgeType, GraphBuilder, NodeId, TypedGraph};

pub const COMMUNITIES: usize = 2;
pub const TEAMS_PER_COMMUNITY: usize = 4;
pub const AUTHORS_PER_TEAM: usize = 5;
pub const PAPERS_PER_TEAM: usize = 2;
pub const TERMS_PER_COMMUNITY: usize = 1;
pub const TERMS_PER_PAPER: usize = 1;
/// Fraction of paper-author edges held out.
pub const HELD_OUT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SyntheticHin {
    /// Training graph, without the held-out edges.
    pub graph: TypedGraph,
    pub held_out: Vec<(NodeId, NodeId, EdgeType)>,
    /// Community of every author.
    pub communities: Vec<(NodeId, usize)>,
}

/// Paths of the files written by [`SyntheticHin::write_files`].
#[derive(Debug, Clone)]
pub struct SyntheticFiles {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub held_out: PathBuf,
    pub labels: PathBuf,
}

impl SyntheticHin {
    pub fn two_communities(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = GraphBuilder::new();
        let mut communities = Vec::new();
        let mut pa_edges = Vec::new();
        let mut other_edges = Vec::new();
        let add = |b: &mut GraphBuilder, label: String, t: &str| {
            b.add_node(&label, t).expect("valid fixture node")
        };
        for c in 0..COMMUNITIES {
            let venue = add(&mut b, format!("v{c}"), "V");
            let terms: Vec<NodeId> = (0..TERMS_PER_COMMUNITY)
                .map(|i| add(&mut b, format!("t{c}_{i}"), "T"))
                .collect();
            for team in 0..TEAMS_PER_COMMUNITY {
                let authors: Vec<NodeId> = (0..AUTHORS_PER_TEAM)
                    .map(|i| add(&mut b, format!("a{c}_{team}_{i}"), "A"))
                    .collect();
                communities.extend(authors.iter().map(|&a| (a, c)));
                for k in 0..PAPERS_PER_TEAM {
                    let paper = add(&mut b, format!("p{c}_{team}_{k}"), "P");
                    pa_edges.extend(authors.iter().map(|&a| (paper, a)));
                    other_edges.push((paper, venue, "PV"));
                    for &t in terms.choose_multiple(&mut rng, TERMS_PER_PAPER) {
                        other_edges.push((paper, t, "PT"));
                    }
                }
            }
        }
        communities.sort();

        let held_count = (pa_edges.len() as f64 * HELD_OUT_FRACTION).round() as usize;
        let mut order: Vec<usize> = (0..pa_edges.len()).collect();
        order.shuffle(&mut rng);
        let mut held = Vec::new();
        for i in order {
            if held.len() == held_count {
                break;
            }
            let (p, a) = pa_edges[i];
            if held.iter().all(|&(hp, ha)| hp != p && ha != a) {
                held.push((p, a));
            }
        }
        for &(p, a) in &pa_edges {
            if !held.contains(&(p, a)) {
                b.add_edge_ids(p, a, "PA").expect("valid fixture edge");
            }
        }
        for &(u, v, e) in &other_edges {
            b.add_edge_ids(u, v, e).expect("valid fixture edge");
        }
        let graph = b.build();
        let pa = graph.schema().edge_type("PA").expect("PA edges present");
        SyntheticHin {
            held_out: held.into_iter().map(|(p, a)| (p, a, pa)).collect(),
            graph,
            communities,
        }
    }

    /// Community ids as node labels, classes named `c0` and `c1`.
    pub fn labels(&self) -> NodeLabels {
        NodeLabels {
            classes: (0..COMMUNITIES).map(|c| format!("c{c}")).collect(),
            nodes: self.communities.iter().map(|&(v, _)| v).collect(),
            labels: self.communities.iter().map(|&(_, c)| vec![c]).collect(),
        }
    }

    /// Writes nodes, training edges, held-out edges and labels as TSV files.
    pub fn write_files(&self, dir: &Path) -> io::Result<SyntheticFiles> {
        fs::create_dir_all(dir)?;
        let files = SyntheticFiles {
            nodes: dir.join("nodes.tsv"),
            edges: dir.join("edges.tsv"),
            held_out: dir.join("held_out.tsv"),
            labels: dir.join("labels.tsv"),
        };
        self.graph.write_files(
            fs::File::create(&files.nodes)?,
            fs::File::create(&files.edges)?,
        )?;
        let g = &self.graph;
        let mut held = io::BufWriter::new(fs::File::create(&files.held_out)?);
        for &(u, v, e) in &self.held_out {
            writeln!(
                held,
                "{}\t{}\t{}",
                g.label(u),
                g.label(v),
                g.schema().edge_type_name(e)
            )?;
        }
        held.flush()?;
        let mut labels = io::BufWriter::new(fs::File::create(&files.labels)?);
        for &(v, c) in &self.communities {
            writeln!(labels, "{}\tc{c}", g.label(v))?;
        }
        labels.flush()?;
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let s = SyntheticHin::two_communities(1);
        let g = &s.graph;
        assert_eq!(g.num_nodes(), 60);
        let schema = g.schema();
        let count = |t: &str| g.nodes_of_type(schema.node_type(t).unwrap()).len();
        assert_eq!(
            (count("A"), count("P"), count("V"), count("T")),
            (40, 16, 2, 2)
        );
        assert_eq!(s.held_out.len(), 8);
        // each held-out author keeps its other team paper
        for &(p, a, e) in &s.held_out {
            assert!(!g.has_edge(p, a, e));
            assert_eq!(g.neighbors_via(a, g.node_type(p), e).len(), 1);
        }
        assert_eq!(s.communities.len(), 40);
    }

    #[test]
    fn fixture_is_seeded() {
        let a = SyntheticHin::two_communities(7);
        let b = SyntheticHin::two_communities(7);
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert_eq!(a.held_out, b.held_out);
    }
}
