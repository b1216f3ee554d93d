//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use mshine::graph::{GraphBuilder, NodeId, TypedGraph};
use mshine::metapath::{select_initial, MetaPathSet, PathId};
use mshine::model::{ModelParams, Tensor};
use mshine::sampler::{negative_sample, sample_triple, Batch};
use mshine::trainer::Gradients;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random 12-node HIN over types A, B, C with edge types AB, BC and BB.
pub fn random_hin(seed: u64) -> TypedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new();
    let types = ["A", "A", "A", "A", "B", "B", "B", "B", "C", "C", "C", "C"];
    for (i, t) in types.iter().enumerate() {
        b.add_node(&format!("{t}{i}"), t).unwrap();
    }
    // a spanning backbone so every type pair is represented
    for (u, v, e) in [
        (0, 4, "AB"),
        (1, 5, "AB"),
        (2, 6, "AB"),
        (3, 7, "AB"),
        (4, 8, "BC"),
        (5, 9, "BC"),
        (6, 10, "BC"),
        (7, 11, "BC"),
        (4, 5, "BB"),
        (6, 7, "BB"),
    ] {
        b.add_edge_ids(NodeId(u), NodeId(v), e).unwrap();
    }
    for _ in 0..14 {
        let a = rng.random_range(0..4);
        let bb = rng.random_range(4..8);
        let c = rng.random_range(8..12);
        b.add_edge_ids(NodeId(a), NodeId(bb), "AB").unwrap();
        b.add_edge_ids(NodeId(bb), NodeId(c), "BC").unwrap();
    }
    b.build()
}

/// All parameter tables filled with random values, including the ones that
/// start at zero or one, so that no gradient path is trivially blocked.
pub fn random_params(g: &TypedGraph, paths: &MetaPathSet, dim: usize, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::init(
        g.num_nodes(),
        dim,
        paths.index().len(),
        paths.len(),
        &mut rng,
    )
    .unwrap();
    for t in Tensor::ALL {
        let (center, spread) = match t {
            Tensor::Vx | Tensor::Vh | Tensor::Vy => (1.0, 0.3),
            Tensor::Wxh | Tensor::Whh | Tensor::Wrh => (0.0, 0.4),
            _ => (0.0, 0.5),
        };
        for v in p.table_mut(t).as_mut_slice() {
            *v = center + rng.random_range(-spread..spread);
        }
    }
    p
}

/// `n` windows drawn from the selected meta-paths, each with `k` negatives.
pub fn random_batch(g: &TypedGraph, paths: &MetaPathSet, n: usize, k: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = paths.index();
    let mut triples = Vec::new();
    let mut negatives = Vec::new();
    while triples.len() < n {
        let p = PathId(rng.random_range(0..paths.len() as u32));
        let ts = index.triples_of(p);
        let t = ts[rng.random_range(0..ts.len())];
        if let Some(tr) = sample_triple(g, index, t, p, &mut rng) {
            if let Ok(negs) = negative_sample(g, tr.next, k, &mut rng) {
                negatives.extend(negs);
                triples.push(tr);
            }
        }
    }
    Batch {
        path: triples[0].path,
        triple: triples[0].triple,
        triples,
        negatives,
        negative_k: k,
    }
}

pub fn selected_paths(g: &TypedGraph) -> MetaPathSet {
    MetaPathSet::new(select_initial(g.schema())).unwrap()
}

fn log_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

/// Straight-line evaluation of the mean batch loss, written directly from the
/// model equations without sharing any code with the library.
#[allow(clippy::needless_range_loop)]
pub fn oracle_loss(p: &ModelParams, batch: &Batch, scale_negatives: bool) -> f64 {
    let d = p.dim();
    let tab = |t: Tensor| p.table(t);
    let mut total = 0.0;
    for (i, tr) in batch.triples.iter().enumerate() {
        let negs = &batch.negatives[i * batch.negative_k..(i + 1) * batch.negative_k];
        let m = tr.path.index();
        let mut s = vec![0.0; d];
        for r in 0..d {
            let mut a = 0.0;
            for c in 0..d {
                let x = tab(Tensor::X).row(tr.mid.index())[c] * tab(Tensor::Vx).row(m)[c];
                let h = tab(Tensor::H).row(tr.prev.index())[c] * tab(Tensor::Vh).row(m)[c];
                let rel = tab(Tensor::R).row(tr.triple.index())[c];
                a += tab(Tensor::Wxh).row(r)[c] * x
                    + tab(Tensor::Whh).row(r)[c] * h
                    + tab(Tensor::Wrh).row(r)[c] * rel;
            }
            s[r] = a.tanh();
        }
        let score = |u: NodeId| -> f64 {
            (0..d)
                .map(|j| tab(Tensor::Why).row(u.index())[j] * tab(Tensor::Vy).row(m)[j] * s[j])
                .sum()
        };
        let c = if scale_negatives {
            1.0 / negs.len() as f64
        } else {
            1.0
        };
        let mut pre = -log_sigmoid(score(tr.next));
        for &n in negs {
            pre -= c * log_sigmoid(-score(n));
        }
        let state: f64 = (0..d)
            .map(|j| {
                let stored = tab(Tensor::H).row(tr.mid.index())[j] * tab(Tensor::Vh).row(m)[j];
                (stored - s[j]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        total += pre + state;
    }
    total / batch.triples.len() as f64
}

/// Central difference step.
pub const FD_STEP: f64 = 1e-4;

/// Analytic gradient of one tensor as a dense vector (zeros for untouched rows).
pub fn analytic_gradient(p: &ModelParams, g: &Gradients, t: Tensor) -> Vec<f64> {
    if t.is_dense() {
        return g.dense(t).to_vec();
    }
    let table = p.table(t);
    (0..table.rows())
        .flat_map(|r| match g.row(t, r) {
            Some(row) => row.to_vec(),
            None => vec![0.0; table.cols()],
        })
        .collect()
}

/// Central differences of the oracle loss for every entry of `t`.
pub fn numeric_gradient(
    p: &ModelParams,
    batch: &mshine::sampler::Batch,
    t: Tensor,
    scale: bool,
) -> Vec<f64> {
    let mut q = p.clone();
    let n = q.table(t).as_slice().len();
    (0..n)
        .map(|i| {
            let orig = q.table(t).as_slice()[i];
            q.table_mut(t).as_mut_slice()[i] = orig + FD_STEP;
            let up = oracle_loss(&q, batch, scale);
            q.table_mut(t).as_mut_slice()[i] = orig - FD_STEP;
            let down = oracle_loss(&q, batch, scale);
            q.table_mut(t).as_mut_slice()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Norm-relative error between two gradient vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
