//! Trainable parameters and the forward pass.
//!
//! Every node owns three rows: a basic row in `X`, a stored state row in `H`
//! and a target row in `W_hy`. Each meta-path owns three decode vectors that
//! specialize those rows by elementwise product. A window
//! `prev -a- mid -b- next` under meta-path `m` and triple type `t` computes
//!
//! ```text
//! state = tanh(W_xh (X[mid] ∘ Vx[m]) + W_hh (H[prev] ∘ Vh[m]) + W_rh R[t])
//! score(u) = (W_hy[u] ∘ Vy[m]) · state
//! ```

mod checkpoint;
mod shared;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::graph::NodeId;
use crate::metapath::{PathId, TripleId};
use crate::sampler::TrainingTriple;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use shared::SharedParams;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Standard deviation of the normal initialization of random tables.
pub const INIT_STDDEV: f64 = 0.1;

/// Parameter groups, in checkpoint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tensor {
    X,
    H,
    Why,
    Wxh,
    Whh,
    Wrh,
    R,
    Vx,
    Vh,
    Vy,
}

impl Tensor {
    pub const ALL: [Tensor; 10] = [
        Tensor::X,
        Tensor::H,
        Tensor::Why,
        Tensor::Wxh,
        Tensor::Whh,
        Tensor::Wrh,
        Tensor::R,
        Tensor::Vx,
        Tensor::Vh,
        Tensor::Vy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::X => "X",
            Tensor::H => "H",
            Tensor::Why => "W_hy",
            Tensor::Wxh => "W_xh",
            Tensor::Whh => "W_hh",
            Tensor::Wrh => "W_rh",
            Tensor::R => "R",
            Tensor::Vx => "V_x",
            Tensor::Vh => "V_h",
            Tensor::Vy => "V_y",
        }
    }

    /// The three square transforms touched by every window.
    pub fn is_dense(self) -> bool {
        matches!(self, Tensor::Wxh | Tensor::Whh | Tensor::Wrh)
    }
}

impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Table {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn normal<R: Rng + ?Sized>(rows: usize, cols: usize, stddev: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, stddev).expect("finite positive stddev");
        Table {
            rows,
            cols,
            data: (0..rows * cols).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "table shape mismatch");
        Table { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dim: usize,
    x: Table,
    h: Table,
    why: Table,
    wxh: Table,
    whh: Table,
    wrh: Table,
    r: Table,
    vx: Table,
    vh: Table,
    vy: Table,
}

impl ModelParams {
    /// Basic rows, square transforms and relation vectors are drawn from
    /// `Normal(0, 0.1)`; state and target rows start at zero; decode vectors
    /// start at one, so every meta-path initially decodes to the shared rows.
    pub fn init<R: Rng + ?Sized>(
        num_nodes: usize,
        dim: usize,
        num_triples: usize,
        num_paths: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        for (count, what) in [
            (num_nodes, "node count"),
            (dim, "dimension"),
            (num_triples, "triple type count"),
            (num_paths, "meta-path count"),
        ] {
            if count == 0 {
                return Err(ModelError::ZeroCount(what));
            }
        }
        let x = Table::normal(num_nodes, dim, INIT_STDDEV, rng);
        let wxh = Table::normal(dim, dim, INIT_STDDEV, rng);
        let whh = Table::normal(dim, dim, INIT_STDDEV, rng);
        let wrh = Table::normal(dim, dim, INIT_STDDEV, rng);
        let r = Table::normal(num_triples, dim, INIT_STDDEV, rng);
        Ok(ModelParams {
            dim,
            x,
            h: Table::zeros(num_nodes, dim),
            why: Table::zeros(num_nodes, dim),
            wxh,
            whh,
            wrh,
            r,
            vx: Table::filled(num_paths, dim, 1.0),
            vh: Table::filled(num_paths, dim, 1.0),
            vy: Table::filled(num_paths, dim, 1.0),
        })
    }

    /// Assembles parameters from explicit tables, checking shapes.
    pub fn from_tables(tables: [Table; 10]) -> Result<Self, ModelError> {
        let [x, h, why, wxh, whh, wrh, r, vx, vh, vy] = tables;
        let dim = x.cols;
        let n = x.rows;
        let ok = [&x, &h, &why, &wxh, &whh, &wrh, &r, &vx, &vh, &vy]
            .iter()
            .all(|t| t.cols == dim)
            && h.rows == n
            && why.rows == n
            && wxh.rows == dim
            && whh.rows == dim
            && wrh.rows == dim
            && vh.rows == vx.rows
            && vy.rows == vx.rows;
        if !ok {
            return Err(ModelError::Corrupt("inconsistent tensor shapes".into()));
        }
        Ok(ModelParams {
            dim,
            x,
            h,
            why,
            wxh,
            whh,
            wrh,
            r,
            vx,
            vh,
            vy,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.x.rows
    }

    pub fn num_triples(&self) -> usize {
        self.r.rows
    }

    pub fn num_paths(&self) -> usize {
        self.vx.rows
    }

    pub fn table(&self, t: Tensor) -> &Table {
        match t {
            Tensor::X => &self.x,
            Tensor::H => &self.h,
            Tensor::Why => &self.why,
            Tensor::Wxh => &self.wxh,
            Tensor::Whh => &self.whh,
            Tensor::Wrh => &self.wrh,
            Tensor::R => &self.r,
            Tensor::Vx => &self.vx,
            Tensor::Vh => &self.vh,
            Tensor::Vy => &self.vy,
        }
    }

    pub fn table_mut(&mut self, t: Tensor) -> &mut Table {
        match t {
            Tensor::X => &mut self.x,
            Tensor::H => &mut self.h,
            Tensor::Why => &mut self.why,
            Tensor::Wxh => &mut self.wxh,
            Tensor::Whh => &mut self.whh,
            Tensor::Wrh => &mut self.wrh,
            Tensor::R => &mut self.r,
            Tensor::Vx => &mut self.vx,
            Tensor::Vh => &mut self.vh,
            Tensor::Vy => &mut self.vy,
        }
    }

    /// First non-finite entry, if any, as `(tensor, flat index)`.
    pub fn first_non_finite(&self) -> Option<(Tensor, usize)> {
        Tensor::ALL.iter().find_map(|&t| {
            self.table(t)
                .as_slice()
                .iter()
                .position(|v| !v.is_finite())
                .map(|i| (t, i))
        })
    }

    pub fn decode_basic(&self, v: NodeId, m: PathId) -> Vec<f64> {
        hadamard(self.x.row(v.index()), self.vx.row(m.index()))
    }

    pub fn decode_state(&self, v: NodeId, m: PathId) -> Vec<f64> {
        hadamard(self.h.row(v.index()), self.vh.row(m.index()))
    }

    pub fn decode_target(&self, v: NodeId, m: PathId) -> Vec<f64> {
        hadamard(self.why.row(v.index()), self.vy.row(m.index()))
    }

    /// Recurrent state for window `(prev, mid)` under triple type `t` and path `m`.
    pub fn compute_state(&self, prev: NodeId, mid: NodeId, t: TripleId, m: PathId) -> Vec<f64> {
        let mut ws = Workspace::new(self.dim);
        ws.load_transforms(self);
        ws.forward_state(self, prev, mid, t, m);
        ws.state
    }

    pub fn compute_triple_state(&self, triple: &TrainingTriple) -> Vec<f64> {
        self.compute_state(triple.prev, triple.mid, triple.triple, triple.path)
    }

    /// Dot product of the decoded target row with `state`.
    pub fn score(&self, state: &[f64], target: NodeId, m: PathId) -> f64 {
        decoded_dot(self.why.row(target.index()), self.vy.row(m.index()), state)
    }

    /// Softmax of scores over `candidates`, which must share one node type.
    pub fn predict_prob(
        &self,
        state: &[f64],
        candidates: &[NodeId],
        m: PathId,
    ) -> Result<Vec<f64>, ModelError> {
        if candidates.is_empty() {
            return Err(ModelError::EmptyCandidates);
        }
        let scores: Vec<f64> = candidates
            .iter()
            .map(|&c| self.score(state, c, m))
            .collect();
        Ok(softmax(&scores))
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// The meta-path decode function: elementwise product with the path vector.
#[inline]
pub fn hadamard(row: &[f64], path_vec: &[f64]) -> Vec<f64> {
    row.iter().zip(path_vec).map(|(a, b)| a * b).collect()
}

#[inline]
pub(crate) fn hadamard_into(row: &[f64], path_vec: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(row).zip(path_vec) {
        *o = a * b;
    }
}

#[inline]
pub(crate) fn decoded_dot(row: &[f64], path_vec: &[f64], state: &[f64]) -> f64 {
    row.iter()
        .zip(path_vec)
        .zip(state)
        .map(|((a, b), s)| a * b * s)
        .sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += M v` for a row-major square matrix.
#[inline]
pub(crate) fn matvec_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(&m[i * d..(i + 1) * d], v);
    }
}

/// Row access used by the forward and backward passes, so the same code runs
/// over exclusive parameters and over the shared lock-free store.
pub trait ParamSource {
    fn dim(&self) -> usize;
    fn read_row(&self, t: Tensor, row: usize, out: &mut [f64]);

    /// Reads a whole square transform, row-major.
    fn read_square(&self, t: Tensor, out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            self.read_row(t, i, &mut out[i * d..(i + 1) * d]);
        }
    }
}

impl ParamSource for ModelParams {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn read_row(&self, t: Tensor, row: usize, out: &mut [f64]) {
        out.copy_from_slice(self.table(t).row(row));
    }

    fn read_square(&self, t: Tensor, out: &mut [f64]) {
        out.copy_from_slice(self.table(t).as_slice());
    }
}

/// Scratch buffers for one window's forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub dim: usize,
    pub wxh: Vec<f64>,
    pub whh: Vec<f64>,
    pub wrh: Vec<f64>,
    pub x_mid: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub h_mid: Vec<f64>,
    pub vx: Vec<f64>,
    pub vh: Vec<f64>,
    pub vy: Vec<f64>,
    pub r: Vec<f64>,
    /// Decoded inputs.
    pub xm: Vec<f64>,
    pub hpm: Vec<f64>,
    pub hnm: Vec<f64>,
    pub state: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        let v = || vec![0.0; dim];
        Workspace {
            dim,
            wxh: vec![0.0; dim * dim],
            whh: vec![0.0; dim * dim],
            wrh: vec![0.0; dim * dim],
            x_mid: v(),
            h_prev: v(),
            h_mid: v(),
            vx: v(),
            vh: v(),
            vy: v(),
            r: v(),
            xm: v(),
            hpm: v(),
            hnm: v(),
            state: v(),
        }
    }

    pub fn load_transforms<P: ParamSource + ?Sized>(&mut self, p: &P) {
        p.read_square(Tensor::Wxh, &mut self.wxh);
        p.read_square(Tensor::Whh, &mut self.whh);
        p.read_square(Tensor::Wrh, &mut self.wrh);
    }

    /// Fills the decoded inputs and `state`. Transforms must be loaded.
    pub fn forward_state<P: ParamSource + ?Sized>(
        &mut self,
        p: &P,
        prev: NodeId,
        mid: NodeId,
        t: TripleId,
        m: PathId,
    ) {
        p.read_row(Tensor::X, mid.index(), &mut self.x_mid);
        p.read_row(Tensor::H, prev.index(), &mut self.h_prev);
        p.read_row(Tensor::H, mid.index(), &mut self.h_mid);
        p.read_row(Tensor::Vx, m.index(), &mut self.vx);
        p.read_row(Tensor::Vh, m.index(), &mut self.vh);
        p.read_row(Tensor::Vy, m.index(), &mut self.vy);
        p.read_row(Tensor::R, t.index(), &mut self.r);
        hadamard_into(&self.x_mid, &self.vx, &mut self.xm);
        hadamard_into(&self.h_prev, &self.vh, &mut self.hpm);
        hadamard_into(&self.h_mid, &self.vh, &mut self.hnm);
        self.state.fill(0.0);
        matvec_add(&self.wxh, &self.xm, &mut self.state);
        matvec_add(&self.whh, &self.hpm, &mut self.state);
        matvec_add(&self.wrh, &self.r, &mut self.state);
        for s in &mut self.state {
            *s = s.tanh();
        }
    }
}
