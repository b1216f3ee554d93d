//! Joint objective, analytic gradients and the SGD loop.
//!
//! Per window the minimized loss is
//!
//! ```text
//! loss_pre   = -log σ(score(next)) - c Σ_k log σ(-score(neg_k))     c = 1/K or 1
//! loss_state = ‖ H[mid] ∘ Vh[m] - state ‖₂
//! ```
//!
//! and a batch contributes the mean of `loss_pre + loss_state` over its windows.
//! The state term back-propagates into both the stored row and the recurrent
//! computation.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{NodeId, TypedGraph};
use crate::metapath::{MetaPathSet, PathId};
use crate::model::{
    decoded_dot, ModelError, ModelParams, ParamSource, SharedParams, Tensor, Workspace,
};
use crate::sampler::{
    epoch_plan, Batch, BatchStream, NegDistribution, SampleError, SamplerConfig, Task,
    TrainingTriple, TripleSampler,
};

/// Seed offsets for the independent random streams of one run.
const INIT_SEED_OFFSET: u64 = 0;
const SAMPLE_SEED_OFFSET: u64 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no meta-path window can be sampled from this graph")]
    NothingToTrain,
    #[error("training diverged in epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint failed: {0}")]
    Checkpoint(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub negative_k: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to `min_learning_rate`.
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub seed: u64,
    pub neg_distribution: NegDistribution,
    /// Windows per triple type per epoch; `None` derives it from the graph.
    pub samples_per_type: Option<usize>,
    /// Checkpoint period in epochs; 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    /// Divide the negative term by K.
    pub scale_negatives: bool,
    /// More than one worker trains racily and is not reproducible.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            negative_k: 5,
            batch_size: 30,
            epochs: 1000,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            seed: 0,
            neg_distribution: NegDistribution::Uniform,
            samples_per_type: None,
            checkpoint_every: 0,
            scale_negatives: true,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if self.negative_k == 0 {
            return bad("negative sample count must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1");
        }
        if self.samples_per_type == Some(0) {
            return bad("samples per type must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.min_learning_rate.is_finite()
            && (0.0..=self.learning_rate).contains(&self.min_learning_rate))
        {
            return bad("final learning rate must lie in [0, learning rate]");
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            batch_size: self.batch_size,
            negative_k: self.negative_k,
            neg_distribution: self.neg_distribution,
            samples_per_type: self.samples_per_type,
        }
    }

    /// Learning rate for update `step` of `total`, linearly decayed.
    pub fn learning_rate_at(&self, step: usize, total: usize) -> f64 {
        if total == 0 {
            return self.learning_rate;
        }
        let frac = (step as f64 / total as f64).min(1.0);
        self.learning_rate - (self.learning_rate - self.min_learning_rate) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub path: PathId,
    pub loss_pre: f64,
    pub loss_state: f64,
}

/// Mean losses over one epoch's windows.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    /// 1-based epoch number.
    pub epoch: usize,
    pub loss_pre: f64,
    pub loss_state: f64,
    pub per_path: Vec<PathLoss>,
}

impl LossReport {
    pub fn total(&self) -> f64 {
        self.loss_pre + self.loss_state
    }
}

/// Mean losses over one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLoss {
    pub loss_pre: f64,
    pub loss_state: f64,
}

impl BatchLoss {
    pub fn total(&self) -> f64 {
        self.loss_pre + self.loss_state
    }
}

/// Sparse row gradients plus the three dense transforms.
#[derive(Debug, Clone)]
pub struct Gradients {
    dim: usize,
    index: HashMap<(Tensor, u32), usize>,
    keys: Vec<(Tensor, u32)>,
    rows: Vec<f64>,
    wxh: Vec<f64>,
    whh: Vec<f64>,
    wrh: Vec<f64>,
}

impl Gradients {
    pub fn new(dim: usize) -> Self {
        Gradients {
            dim,
            index: HashMap::new(),
            keys: Vec::new(),
            rows: Vec::new(),
            wxh: vec![0.0; dim * dim],
            whh: vec![0.0; dim * dim],
            wrh: vec![0.0; dim * dim],
        }
    }

    pub fn clear(&mut self) {
        self.index.clear();
        self.keys.clear();
        self.rows.clear();
        self.wxh.fill(0.0);
        self.whh.fill(0.0);
        self.wrh.fill(0.0);
    }

    /// Rows that received a gradient, in first-touch order.
    pub fn touched(&self) -> &[(Tensor, u32)] {
        &self.keys
    }

    pub fn row(&self, t: Tensor, row: usize) -> Option<&[f64]> {
        self.index
            .get(&(t, row as u32))
            .map(|&i| &self.rows[i * self.dim..(i + 1) * self.dim])
    }

    /// Gradient of a dense transform, row-major. Panics for sparse tensors.
    pub fn dense(&self, t: Tensor) -> &[f64] {
        match t {
            Tensor::Wxh => &self.wxh,
            Tensor::Whh => &self.whh,
            Tensor::Wrh => &self.wrh,
            other => panic!("{other} is not a dense tensor"),
        }
    }

    fn row_mut(&mut self, t: Tensor, row: usize) -> &mut [f64] {
        let d = self.dim;
        let next = self.keys.len();
        let i = *self.index.entry((t, row as u32)).or_insert(next);
        if i == next {
            self.keys.push((t, row as u32));
            self.rows.resize(self.rows.len() + d, 0.0);
        }
        &mut self.rows[i * d..(i + 1) * d]
    }

    fn sparse_rows(&self) -> impl Iterator<Item = (Tensor, usize, &[f64])> + '_ {
        self.keys
            .iter()
            .zip(self.rows.chunks_exact(self.dim))
            .map(|(&(t, r), g)| (t, r as usize, g))
    }

    fn dense_groups(&self) -> [(Tensor, &[f64]); 3] {
        [
            (Tensor::Wxh, &self.wxh),
            (Tensor::Whh, &self.whh),
            (Tensor::Wrh, &self.wrh),
        ]
    }
}

#[inline]
fn log_sigmoid(x: f64) -> f64 {
    // -softplus(-x)
    -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(value: f64, what: &str) -> Result<f64, TrainError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(TrainError::NonFinite(format!("{what} = {value}")))
    }
}

/// Prediction loss of one window against its negatives.
pub fn loss_pre<P: ParamSource + ?Sized>(
    p: &P,
    triple: &TrainingTriple,
    negatives: &[NodeId],
    scale_negatives: bool,
) -> Result<f64, TrainError> {
    let mut ws = Workspace::new(p.dim());
    ws.load_transforms(p);
    ws.forward_state(p, triple.prev, triple.mid, triple.triple, triple.path);
    let mut row = vec![0.0; p.dim()];
    let mut score = |u: NodeId| {
        p.read_row(Tensor::Why, u.index(), &mut row);
        decoded_dot(&row, &ws.vy, &ws.state)
    };
    let c = negative_coef(negatives.len(), scale_negatives);
    let mut loss = -log_sigmoid(score(triple.next));
    for &n in negatives {
        loss -= c * log_sigmoid(-score(n));
    }
    check_finite(loss, "prediction loss")
}

/// Distance between the stored decoded state of `mid` and the computed state.
pub fn loss_state<P: ParamSource + ?Sized>(p: &P, triple: &TrainingTriple) -> f64 {
    let mut ws = Workspace::new(p.dim());
    ws.load_transforms(p);
    ws.forward_state(p, triple.prev, triple.mid, triple.triple, triple.path);
    ws.hnm
        .iter()
        .zip(&ws.state)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn negative_coef(k: usize, scale: bool) -> f64 {
    if scale && k > 0 {
        1.0 / k as f64
    } else {
        1.0
    }
}

/// Reusable buffers for evaluating batches.
#[derive(Debug, Clone)]
pub(crate) struct Objective {
    ws: Workspace,
    grads: Gradients,
    row: Vec<f64>,
    ds: Vec<f64>,
    tmp: Vec<f64>,
    scale_negatives: bool,
}

impl Objective {
    pub fn new(dim: usize, scale_negatives: bool) -> Self {
        Objective {
            ws: Workspace::new(dim),
            grads: Gradients::new(dim),
            row: vec![0.0; dim],
            ds: vec![0.0; dim],
            tmp: vec![0.0; dim],
            scale_negatives,
        }
    }

    /// Mean batch loss; gradients are left in `self.grads`.
    pub fn evaluate<P: ParamSource + ?Sized>(
        &mut self,
        p: &P,
        batch: &Batch,
    ) -> Result<BatchLoss, TrainError> {
        self.grads.clear();
        if batch.is_empty() {
            return Ok(BatchLoss::default());
        }
        self.ws.load_transforms(p);
        let weight = 1.0 / batch.len() as f64;
        let mut total = BatchLoss::default();
        for (tr, negs) in batch.iter() {
            let (pre, state) = self.window(p, tr, negs, weight);
            total.loss_pre += pre * weight;
            total.loss_state += state * weight;
        }
        check_finite(total.loss_pre, "prediction loss")?;
        check_finite(total.loss_state, "state loss")?;
        Ok(total)
    }

    // index loops mirror the per-coordinate chain rule over several buffers
    #[allow(clippy::needless_range_loop)]
    fn window<P: ParamSource + ?Sized>(
        &mut self,
        p: &P,
        tr: &TrainingTriple,
        negs: &[NodeId],
        weight: f64,
    ) -> (f64, f64) {
        let d = self.ws.dim;
        let m = tr.path.index();
        self.ws
            .forward_state(p, tr.prev, tr.mid, tr.triple, tr.path);
        let ws = &self.ws;
        let grads = &mut self.grads;
        self.ds.fill(0.0);

        let c = negative_coef(negs.len(), self.scale_negatives);
        let mut loss_pre = 0.0;
        let targets = std::iter::once((tr.next, true)).chain(negs.iter().map(|&n| (n, false)));
        for (u, positive) in targets {
            p.read_row(Tensor::Why, u.index(), &mut self.row);
            let score = decoded_dot(&self.row, &ws.vy, &ws.state);
            let dscore = if positive {
                loss_pre -= log_sigmoid(score);
                sigmoid(score) - 1.0
            } else {
                loss_pre -= c * log_sigmoid(-score);
                c * sigmoid(score)
            } * weight;
            for j in 0..d {
                self.ds[j] += dscore * self.row[j] * ws.vy[j];
            }
            let g = grads.row_mut(Tensor::Why, u.index());
            for j in 0..d {
                g[j] += dscore * ws.state[j] * ws.vy[j];
            }
            let g = grads.row_mut(Tensor::Vy, m);
            for j in 0..d {
                g[j] += dscore * ws.state[j] * self.row[j];
            }
        }

        let mut norm = 0.0;
        for j in 0..d {
            self.tmp[j] = ws.hnm[j] - ws.state[j];
            norm += self.tmp[j] * self.tmp[j];
        }
        let loss_state = norm.sqrt();
        if loss_state > 0.0 {
            let scale = weight / loss_state;
            for v in &mut self.tmp {
                *v *= scale;
            }
            let g = grads.row_mut(Tensor::H, tr.mid.index());
            for j in 0..d {
                g[j] += self.tmp[j] * ws.vh[j];
            }
            let g = grads.row_mut(Tensor::Vh, m);
            for j in 0..d {
                g[j] += self.tmp[j] * ws.h_mid[j];
            }
            for j in 0..d {
                self.ds[j] -= self.tmp[j];
            }
        }

        // through tanh
        for j in 0..d {
            self.ds[j] *= 1.0 - ws.state[j] * ws.state[j];
        }
        let da = &self.ds;
        for i in 0..d {
            if da[i] == 0.0 {
                continue;
            }
            let row = i * d..(i + 1) * d;
            for ((gx, gh), (gr, j)) in grads.wxh[row.clone()]
                .iter_mut()
                .zip(&mut grads.whh[row.clone()])
                .zip(grads.wrh[row].iter_mut().zip(0..d))
            {
                *gx += da[i] * ws.xm[j];
                *gh += da[i] * ws.hpm[j];
                *gr += da[i] * ws.r[j];
            }
        }

        transpose_matvec(&ws.wxh, da, &mut self.tmp);
        let g = grads.row_mut(Tensor::X, tr.mid.index());
        for j in 0..d {
            g[j] += self.tmp[j] * ws.vx[j];
        }
        let g = grads.row_mut(Tensor::Vx, m);
        for j in 0..d {
            g[j] += self.tmp[j] * ws.x_mid[j];
        }

        transpose_matvec(&ws.whh, da, &mut self.tmp);
        let g = grads.row_mut(Tensor::H, tr.prev.index());
        for j in 0..d {
            g[j] += self.tmp[j] * ws.vh[j];
        }
        let g = grads.row_mut(Tensor::Vh, m);
        for j in 0..d {
            g[j] += self.tmp[j] * ws.h_prev[j];
        }

        transpose_matvec(&ws.wrh, da, &mut self.tmp);
        let g = grads.row_mut(Tensor::R, tr.triple.index());
        for j in 0..d {
            g[j] += self.tmp[j];
        }

        (loss_pre, loss_state)
    }
}

/// `out = Mᵀ v` for a row-major square matrix.
fn transpose_matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    out.fill(0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(&m[i * d..(i + 1) * d]) {
            *o += vi * w;
        }
    }
}

/// Mean loss of a batch and its exact gradients.
pub fn batch_objective<P: ParamSource + ?Sized>(
    p: &P,
    batch: &Batch,
    scale_negatives: bool,
) -> Result<(BatchLoss, Gradients), TrainError> {
    let mut obj = Objective::new(p.dim(), scale_negatives);
    let loss = obj.evaluate(p, batch)?;
    Ok((loss, obj.grads))
}

/// `θ ← θ - lr ∇θ` over the touched rows and the dense transforms.
///
/// Nothing is written if any updated value would be non-finite.
pub fn sgd_step(p: &mut ModelParams, g: &Gradients, lr: f64) -> Result<(), TrainError> {
    for (t, r, grad) in g.sparse_rows() {
        check_update(p.table(t).row(r), grad, lr, t, Some(r))?;
    }
    for (t, grad) in g.dense_groups() {
        check_update(p.table(t).as_slice(), grad, lr, t, None)?;
    }
    for (t, r, grad) in g.sparse_rows() {
        axpy(p.table_mut(t).row_mut(r), grad, lr);
    }
    for (t, grad) in g.dense_groups() {
        axpy(p.table_mut(t).as_mut_slice(), grad, lr);
    }
    Ok(())
}

fn check_update(
    cur: &[f64],
    grad: &[f64],
    lr: f64,
    t: Tensor,
    row: Option<usize>,
) -> Result<(), TrainError> {
    match cur
        .iter()
        .zip(grad)
        .position(|(v, g)| !(v - lr * g).is_finite())
    {
        None => Ok(()),
        Some(j) => Err(TrainError::NonFinite(match row {
            Some(r) => format!("update of {t}[{r}][{j}]"),
            None => format!("update of {t} entry {j}"),
        })),
    }
}

#[inline]
fn axpy(dst: &mut [f64], grad: &[f64], lr: f64) {
    for (v, g) in dst.iter_mut().zip(grad) {
        *v -= lr * g;
    }
}

/// Events reported while training.
#[derive(Debug)]
pub enum Progress<'a> {
    Epoch(&'a LossReport),
    /// Periodic checkpoint after `epoch` epochs.
    Checkpoint {
        epoch: usize,
        params: &'a ModelParams,
    },
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub reports: Vec<LossReport>,
}

pub fn train(
    g: &TypedGraph,
    paths: &MetaPathSet,
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    train_with(g, paths, config, |_| Ok(()))
}

/// Trains from a fresh initialization, passing epoch reports and periodic
/// checkpoints to `observe`. An error from `observe` aborts the run.
pub fn train_with<F>(
    g: &TypedGraph,
    paths: &MetaPathSet,
    config: &TrainConfig,
    mut observe: F,
) -> Result<TrainOutput, TrainError>
where
    F: FnMut(Progress<'_>) -> Result<(), TrainError>,
{
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(INIT_SEED_OFFSET));
    let params = ModelParams::init(
        g.num_nodes(),
        config.dim,
        paths.index().len(),
        paths.len(),
        &mut init_rng,
    )?;
    if config.epochs == 0 {
        return Ok(TrainOutput {
            params,
            reports: Vec::new(),
        });
    }
    let sampler = TripleSampler::new(g, paths.index());
    let tasks = epoch_plan(g, paths, &sampler, &config.sampler_config());
    if tasks.is_empty() {
        return Err(TrainError::NothingToTrain);
    }
    info!(
        "training {} meta-paths, {} triple types, {} batches per epoch, {} workers",
        paths.len(),
        paths.index().len(),
        tasks.iter().map(|t| t.batches).sum::<usize>(),
        config.workers
    );
    if config.workers == 1 {
        train_sequential(g, paths, config, params, sampler, tasks, &mut observe)
    } else {
        train_racy(g, paths, config, params, sampler, tasks, &mut observe)
    }
}

/// Running per-path sums for one epoch.
#[derive(Debug, Clone)]
struct EpochAccumulator {
    pre: Vec<f64>,
    state: Vec<f64>,
    batches: Vec<usize>,
}

impl EpochAccumulator {
    fn new(num_paths: usize) -> Self {
        EpochAccumulator {
            pre: vec![0.0; num_paths],
            state: vec![0.0; num_paths],
            batches: vec![0; num_paths],
        }
    }

    fn add(&mut self, path: PathId, loss: BatchLoss) {
        let i = path.index();
        self.pre[i] += loss.loss_pre;
        self.state[i] += loss.loss_state;
        self.batches[i] += 1;
    }

    fn merge(&mut self, other: &EpochAccumulator) {
        for i in 0..self.pre.len() {
            self.pre[i] += other.pre[i];
            self.state[i] += other.state[i];
            self.batches[i] += other.batches[i];
        }
    }

    /// Batches are equally sized, so the mean of batch means is the window mean.
    fn report(&self, epoch: usize) -> LossReport {
        let n: usize = self.batches.iter().sum();
        let per_path = (0..self.pre.len())
            .filter(|&i| self.batches[i] > 0)
            .map(|i| PathLoss {
                path: PathId(i as u32),
                loss_pre: self.pre[i] / self.batches[i] as f64,
                loss_state: self.state[i] / self.batches[i] as f64,
            })
            .collect();
        LossReport {
            epoch,
            loss_pre: self.pre.iter().sum::<f64>() / n.max(1) as f64,
            loss_state: self.state.iter().sum::<f64>() / n.max(1) as f64,
            per_path,
        }
    }
}

fn finish_epoch<F>(
    config: &TrainConfig,
    epoch: usize,
    acc: &EpochAccumulator,
    params: impl FnOnce() -> ModelParams,
    reports: &mut Vec<LossReport>,
    observe: &mut F,
) -> Result<Option<ModelParams>, TrainError>
where
    F: FnMut(Progress<'_>) -> Result<(), TrainError>,
{
    let report = acc.report(epoch);
    debug!(
        "epoch {epoch}: loss_pre {:.6} loss_state {:.6}",
        report.loss_pre, report.loss_state
    );
    observe(Progress::Epoch(&report))?;
    reports.push(report);
    if config.checkpoint_every > 0 && epoch.is_multiple_of(config.checkpoint_every) {
        let snapshot = params();
        observe(Progress::Checkpoint {
            epoch,
            params: &snapshot,
        })?;
        return Ok(Some(snapshot));
    }
    Ok(None)
}

fn train_sequential<F>(
    g: &TypedGraph,
    paths: &MetaPathSet,
    config: &TrainConfig,
    mut params: ModelParams,
    sampler: TripleSampler,
    tasks: Vec<Task>,
    observe: &mut F,
) -> Result<TrainOutput, TrainError>
where
    F: FnMut(Progress<'_>) -> Result<(), TrainError>,
{
    let seed = config.seed.wrapping_add(SAMPLE_SEED_OFFSET);
    let mut stream =
        BatchStream::with_tasks(g, paths, config.sampler_config(), seed, sampler, tasks)?;
    let per_epoch = stream.batches_per_epoch();
    let total = per_epoch * config.epochs;
    let mut obj = Objective::new(config.dim, config.scale_negatives);
    let mut reports = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        let mut acc = EpochAccumulator::new(paths.len());
        for _ in 0..per_epoch {
            let batch = stream.next().expect("non-empty plan never ends");
            let lr = config.learning_rate_at(step, total);
            let diverged = |e: TrainError| TrainError::Diverged {
                epoch,
                detail: e.to_string(),
            };
            let loss = obj.evaluate(&params, &batch).map_err(diverged)?;
            sgd_step(&mut params, &obj.grads, lr).map_err(diverged)?;
            acc.add(batch.path, loss);
            step += 1;
        }
        finish_epoch(
            config,
            epoch,
            &acc,
            || params.clone(),
            &mut reports,
            observe,
        )?;
    }
    Ok(TrainOutput { params, reports })
}

/// Racy data-parallel training: the epoch plan is dealt round-robin to the
/// workers, each with its own sampler stream, all updating one shared store.
fn train_racy<F>(
    g: &TypedGraph,
    paths: &MetaPathSet,
    config: &TrainConfig,
    params: ModelParams,
    sampler: TripleSampler,
    tasks: Vec<Task>,
    observe: &mut F,
) -> Result<TrainOutput, TrainError>
where
    F: FnMut(Progress<'_>) -> Result<(), TrainError>,
{
    let workers = config.workers.min(tasks.len());
    let mut streams = Vec::with_capacity(workers);
    for w in 0..workers {
        let shard: Vec<Task> = tasks.iter().skip(w).step_by(workers).copied().collect();
        let seed = config
            .seed
            .wrapping_add(SAMPLE_SEED_OFFSET)
            .wrapping_add(w as u64 * 0x9E37_79B9_7F4A_7C15);
        streams.push(BatchStream::with_tasks(
            g,
            paths,
            config.sampler_config(),
            seed,
            sampler.clone(),
            shard,
        )?);
    }
    let per_epoch: usize = streams.iter().map(|s| s.batches_per_epoch()).sum();
    let total = per_epoch * config.epochs;
    let shared = SharedParams::new(&params);
    drop(params);
    let step = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let mut reports = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let acc = Mutex::new(EpochAccumulator::new(paths.len()));
        let first_error: Mutex<Option<TrainError>> = Mutex::new(None);
        thread::scope(|scope| {
            for stream in streams.iter_mut() {
                let (shared, step, failed, acc, first_error) =
                    (&shared, &step, &failed, &acc, &first_error);
                scope.spawn(move || {
                    let mut obj = Objective::new(config.dim, config.scale_negatives);
                    let mut local = EpochAccumulator::new(paths.len());
                    for _ in 0..stream.batches_per_epoch() {
                        if failed.load(Ordering::Relaxed) {
                            return;
                        }
                        let batch = stream.next().expect("non-empty shard never ends");
                        let lr =
                            config.learning_rate_at(step.fetch_add(1, Ordering::Relaxed), total);
                        let result = obj
                            .evaluate(shared, &batch)
                            .and_then(|loss| apply_shared(shared, &obj.grads, lr).map(|_| loss));
                        match result {
                            Ok(loss) => local.add(batch.path, loss),
                            Err(e) => {
                                failed.store(true, Ordering::Relaxed);
                                first_error
                                    .lock()
                                    .unwrap_or_else(|p| p.into_inner())
                                    .get_or_insert(e);
                                return;
                            }
                        }
                    }
                    acc.lock().unwrap_or_else(|p| p.into_inner()).merge(&local);
                });
            }
        });
        if let Some(e) = first_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
            return Err(TrainError::Diverged {
                epoch,
                detail: e.to_string(),
            });
        }
        let acc = acc.into_inner().unwrap_or_else(|p| p.into_inner());
        finish_epoch(
            config,
            epoch,
            &acc,
            || shared.snapshot(),
            &mut reports,
            observe,
        )?;
    }
    Ok(TrainOutput {
        params: shared.snapshot(),
        reports,
    })
}

fn apply_shared(shared: &SharedParams, g: &Gradients, lr: f64) -> Result<(), TrainError> {
    let mut cur = vec![0.0; g.dim];
    for (t, r, grad) in g.sparse_rows() {
        shared.read_row(t, r, &mut cur);
        check_update(&cur, grad, lr, t, Some(r))?;
        shared.sub_row(t, r, lr, grad);
    }
    for (t, grad) in g.dense_groups() {
        if let Some(j) = grad.iter().position(|v| !(lr * v).is_finite()) {
            return Err(TrainError::NonFinite(format!("update of {t} entry {j}")));
        }
    }
    shared.sub_dense(&g.dense_groups(), lr);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metapath::TripleId;

    fn window() -> TrainingTriple {
        TrainingTriple {
            prev: NodeId(0),
            mid: NodeId(1),
            next: NodeId(2),
            triple: TripleId(0),
            path: PathId(0),
        }
    }

    fn zero_params(n: usize, d: usize) -> ModelParams {
        let mut p = ModelParams::init(n, d, 1, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for t in Tensor::ALL {
            p.table_mut(t).as_mut_slice().fill(0.0);
        }
        p
    }

    #[test]
    fn zero_parameters_anchor() {
        let p = zero_params(8, 4);
        let negs = [NodeId(3), NodeId(4), NodeId(5), NodeId(6), NodeId(7)];
        let l = loss_pre(&p, &window(), &negs, true).unwrap();
        assert!((l - (-2.0 * 0.5f64.ln())).abs() < 1e-12);
        assert!((l - 1.386294).abs() < 1e-6);
        assert_eq!(loss_state(&p, &window()), 0.0);
    }

    #[test]
    fn unscaled_negatives_sum() {
        let p = zero_params(8, 4);
        let negs = [NodeId(3), NodeId(4), NodeId(5)];
        let l = loss_pre(&p, &window(), &negs, false).unwrap();
        assert!((l - 4.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_scores_give_zero_loss() {
        let mut p = zero_params(4, 1);
        p.table_mut(Tensor::Vy).as_mut_slice().fill(1.0);
        p.table_mut(Tensor::Wxh).as_mut_slice().fill(1.0);
        p.table_mut(Tensor::X).row_mut(1)[0] = 100.0;
        p.table_mut(Tensor::Vx).as_mut_slice().fill(1.0);
        p.table_mut(Tensor::Why).row_mut(2)[0] = 1e6;
        p.table_mut(Tensor::Why).row_mut(3)[0] = -1e6;
        let l = loss_pre(&p, &window(), &[NodeId(3)], true).unwrap();
        assert!(l.abs() < 1e-12, "{l}");
    }

    #[test]
    fn one_dimensional_state_distance() {
        // stored decoded state 0.5, computed state atanh(0.2) through tanh = 0.2
        let mut p = zero_params(3, 1);
        p.table_mut(Tensor::Vh).as_mut_slice().fill(1.0);
        p.table_mut(Tensor::H).row_mut(1)[0] = 0.5;
        p.table_mut(Tensor::Wrh).as_mut_slice().fill(1.0);
        p.table_mut(Tensor::R).row_mut(0)[0] = 0.2f64.atanh();
        let l = loss_state(&p, &window());
        assert!((l - 0.3).abs() < 1e-12, "{l}");
    }

    #[test]
    fn sgd_zero_gradient_and_zero_rate() {
        let mut p = ModelParams::init(5, 3, 1, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let before = p.clone();
        sgd_step(&mut p, &Gradients::new(3), 0.1).unwrap();
        assert_eq!(p, before);
        let batch = Batch {
            path: PathId(0),
            triple: TripleId(0),
            triples: vec![window()],
            negatives: vec![NodeId(3)],
            negative_k: 1,
        };
        let (_, g) = batch_objective(&p, &batch, true).unwrap();
        sgd_step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_scalar_step() {
        // one X entry with gradient 2 at lr 0.25 moves from 1 to 0.5
        let mut p = zero_params(2, 1);
        p.table_mut(Tensor::X).row_mut(1)[0] = 1.0;
        let mut g = Gradients::new(1);
        g.row_mut(Tensor::X, 1)[0] = 2.0;
        sgd_step(&mut p, &g, 0.25).unwrap();
        assert_eq!(p.table(Tensor::X).row(1)[0], 0.5);
    }

    #[test]
    fn sgd_refuses_non_finite_update() {
        let mut p = zero_params(2, 1);
        let before = p.clone();
        let mut g = Gradients::new(1);
        g.row_mut(Tensor::X, 0)[0] = 1.0;
        g.row_mut(Tensor::H, 1)[0] = f64::INFINITY;
        assert!(matches!(
            sgd_step(&mut p, &g, 0.1),
            Err(TrainError::NonFinite(_))
        ));
        assert_eq!(p, before);
    }

    #[test]
    fn learning_rate_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate_at(0, 100), 0.025);
        assert!((c.learning_rate_at(100, 100) - 0.0001).abs() < 1e-15);
        assert!((c.learning_rate_at(50, 100) - 0.01255).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                dim: 0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                workers: 0,
                ..Default::default()
            },
            TrainConfig {
                min_learning_rate: 1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn gradient_rows_accumulate() {
        let mut g = Gradients::new(2);
        g.row_mut(Tensor::R, 3)[1] += 1.0;
        g.row_mut(Tensor::R, 3)[1] += 1.0;
        assert_eq!(g.row(Tensor::R, 3), Some(&[0.0, 2.0][..]));
        assert_eq!(g.touched(), &[(Tensor::R, 3)]);
        assert!(g.row(Tensor::R, 2).is_none());
    }
}
