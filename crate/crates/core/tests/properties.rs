mod common;

use std::collections::BTreeSet;

use common::{random_hin, random_params, selected_paths};
use mshine::eval::{
    average_precision_at_k, mrr_score, precision_at_k, recall_at_k, reciprocal_rank, RankingResult,
};
use mshine::graph::{read_graph, GraphBuilder, NodeId, Schema, TypedGraph};
use mshine::metapath::{decompose, select_initial, MetaPath, PathId};
use mshine::model::Tensor;
use proptest::prelude::*;

const TYPES: [&str; 3] = ["A", "B", "C"];
/// Edge types between the three node types, including a self relation.
const EDGE_TYPES: [(&str, usize, usize); 4] =
    [("AB", 0, 1), ("BC", 1, 2), ("BB", 1, 1), ("AC", 0, 2)];

fn hin_strategy() -> impl Strategy<Value = TypedGraph> {
    (
        prop::collection::vec(0usize..3, 3..16),
        prop::collection::vec(
            (
                0usize..4,
                any::<prop::sample::Index>(),
                any::<prop::sample::Index>(),
            ),
            0..40,
        ),
    )
        .prop_map(|(node_types, edges)| {
            let mut b = GraphBuilder::new();
            for (i, &t) in node_types.iter().enumerate() {
                b.add_node(&format!("n{i}"), TYPES[t]).unwrap();
            }
            let of_type = |t: usize| -> Vec<u32> {
                (0..node_types.len() as u32)
                    .filter(|&i| node_types[i as usize] == t)
                    .collect()
            };
            for (e, i, j) in edges {
                let (name, ta, tb) = EDGE_TYPES[e];
                let (us, vs) = (of_type(ta), of_type(tb));
                if us.is_empty() || vs.is_empty() {
                    continue;
                }
                let (u, v) = (*i.get(&us), *j.get(&vs));
                if u != v {
                    b.add_edge_ids(NodeId(u), NodeId(v), name).unwrap();
                }
            }
            b.build()
        })
}

fn labeled_edges(g: &TypedGraph) -> BTreeSet<(String, String, String)> {
    g.edges()
        .iter()
        .map(|&(u, v, e)| {
            let (a, b) = (g.label(u).to_string(), g.label(v).to_string());
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            (a, b, g.schema().edge_type_name(e).to_string())
        })
        .collect()
}

fn schema_strategy() -> impl Strategy<Value = Schema> {
    prop::sample::subsequence(EDGE_TYPES.to_vec(), 1..=4).prop_map(|edges| {
        let defs: Vec<(&str, &str, &str)> = edges
            .iter()
            .map(|&(n, a, b)| (n, TYPES[a], TYPES[b]))
            .collect();
        Schema::new(&TYPES, &defs).unwrap()
    })
}

fn ranking_strategy() -> impl Strategy<Value = RankingResult> {
    (
        0usize..20,
        prop::collection::vec(any::<bool>(), 25),
        any::<u64>(),
    )
        .prop_map(|(n, rel, seed)| {
            let mut ids: Vec<u32> = (0..25).collect();
            // cheap deterministic shuffle
            ids.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
            RankingResult {
                query: NodeId(u32::MAX),
                ranked: ids[..n].iter().map(|&v| NodeId(v)).collect(),
                relevant: (0..25).filter(|&i| rel[i as usize]).map(NodeId).collect(),
            }
        })
}

proptest! {
    #[test]
    fn adjacency_is_symmetric(g in hin_strategy()) {
        let mut degree_sum = 0;
        for v in 0..g.num_nodes() as u32 {
            degree_sum += g.degree(NodeId(v));
        }
        prop_assert_eq!(degree_sum, 2 * g.num_edges());
        for &(u, v, e) in g.edges() {
            prop_assert!(g.has_edge(u, v, e) && g.has_edge(v, u, e));
            prop_assert!(g.neighbors_via(u, g.node_type(v), e).iter().any(|&(w, _)| w == v));
            prop_assert!(g.neighbors_via(v, g.node_type(u), e).iter().any(|&(w, _)| w == u));
        }
    }

    #[test]
    fn graph_files_round_trip(g in hin_strategy()) {
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        g.write_files(&mut nodes, &mut edges).unwrap();
        let h = read_graph(nodes.as_slice(), "nodes", edges.as_slice(), "edges").unwrap();
        prop_assert_eq!(h.labels(), g.labels());
        prop_assert_eq!(labeled_edges(&h), labeled_edges(&g));
    }

    #[test]
    fn decomposition_ignores_repetition(schema in schema_strategy(), pick in any::<prop::sample::Index>()) {
        let paths = select_initial(&schema);
        prop_assume!(!paths.is_empty());
        let m = pick.get(&paths);
        let (nodes, edges) = (m.node_types(), m.edge_types());
        let twice_nodes: Vec<_> = nodes.iter().chain(&nodes[1..]).copied().collect();
        let twice_edges: Vec<_> = edges.iter().chain(edges).copied().collect();
        let doubled = MetaPath::new(&schema, twice_nodes, twice_edges).unwrap();
        prop_assert_eq!(decompose(&doubled).unwrap(), decompose(m).unwrap());
    }

    #[test]
    fn selection_is_deterministic_and_irredundant(schema in schema_strategy()) {
        let a = select_initial(&schema);
        prop_assert_eq!(&a, &select_initial(&schema));
        let sets: Vec<_> = a.iter().map(|m| decompose(m).unwrap()).collect();
        for (i, si) in sets.iter().enumerate() {
            let m = &a[i];
            let reversed: Vec<_> = m.node_types().iter().rev().copied().collect();
            prop_assert_eq!(m.node_types(), reversed.as_slice());
            for (j, sj) in sets.iter().enumerate() {
                prop_assert!(i == j || !si.is_subset(sj), "{} is contained in {}", m.id(), a[j].id());
            }
        }
    }

    #[test]
    fn decoding_is_elementwise(seed in any::<u64>(), dim in 1usize..8, v in 0u32..12) {
        let g = random_hin(seed % 16);
        let paths = selected_paths(&g);
        let p = random_params(&g, &paths, dim, seed);
        for m in 0..paths.len() {
            let m = PathId(m as u32);
            let cases = [
                (p.decode_basic(NodeId(v), m), Tensor::X, Tensor::Vx),
                (p.decode_state(NodeId(v), m), Tensor::H, Tensor::Vh),
                (p.decode_target(NodeId(v), m), Tensor::Why, Tensor::Vy),
            ];
            for (got, node_t, path_t) in cases {
                for (j, value) in got.iter().enumerate() {
                    let want = p.table(node_t).row(v as usize)[j] * p.table(path_t).row(m.index())[j];
                    prop_assert_eq!(*value, want);
                }
            }
        }
    }

    #[test]
    fn softmax_commutes_with_permutation(seed in any::<u64>(), rotate in 0usize..4) {
        let g = random_hin(seed % 16);
        let paths = selected_paths(&g);
        let p = random_params(&g, &paths, 6, seed);
        let state = vec![0.3, -0.2, 0.9, 0.0, -1.0, 0.5];
        let candidates = g.nodes_of_type(g.node_type(NodeId(0)));
        let mut rotated = candidates.to_vec();
        rotated.rotate_left(rotate % candidates.len());
        let a = p.predict_prob(&state, candidates, PathId(0)).unwrap();
        let b = p.predict_prob(&state, &rotated, PathId(0)).unwrap();
        for (i, c) in rotated.iter().enumerate() {
            let j = candidates.iter().position(|x| x == c).unwrap();
            prop_assert!((a[j] - b[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn metric_identities(r in ranking_strategy(), k in 1usize..25) {
        let kk = k.min(r.ranked.len());
        let hits = r.hits_at(k) as f64;
        prop_assert_eq!(precision_at_k(&r, k) * kk as f64, if kk == 0 { 0.0 } else { hits });
        if let Some(rec) = recall_at_k(&r, k) {
            prop_assert!((rec * r.relevant.len() as f64 - hits).abs() < 1e-9);
        }
        let ap = average_precision_at_k(&r, k);
        prop_assert!((0.0..=1.0).contains(&ap));
        let rr = reciprocal_rank(&r);
        prop_assert!((0.0..=1.0).contains(&rr));
        let mrr = mrr_score(std::slice::from_ref(&r));
        prop_assert_eq!(mrr.is_some(), !r.relevant.is_empty());
        prop_assert!(mrr.is_none_or(|m| (0.0..=1.0).contains(&m)));
    }
}
