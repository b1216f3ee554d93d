//! `mshine`: meta-path selection, training, export and evaluation pipelines.

mod manifest;

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use mshine::eval::{self, EvalError, LinkTask};
use mshine::graph::{self, GraphError, TypedGraph};
use mshine::metapath::{self, MetaPathError, MetaPathSet, PathId};
use mshine::model::{read_checkpoint, write_checkpoint, Checkpoint, ModelError};
use mshine::sampler::NegDistribution;
use mshine::trainer::{self, Progress, TrainConfig, TrainError};

use manifest::{manifest_path, write_atomic, RunManifest};

/// Added to `--seed` for the classification splits.
const CLASSIFY_SEED_OFFSET: u64 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mshine",
    version,
    about = "Meta-path based heterogeneous network embedding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the initial meta-path set with the triple types of each path.
    SelectMetapaths(SelectArgs),
    /// Train a model and write a checkpoint plus a run manifest.
    Train(TrainArgs),
    /// Write one embedding file per meta-path from a checkpoint.
    Export(ExportArgs),
    /// Rank candidates for held-out edges and print link prediction metrics.
    EvalLink(EvalLinkArgs),
    /// Node classification on exported embeddings.
    EvalClassify(EvalClassifyArgs),
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Node file: `label<TAB>type` per line.
    #[arg(long)]
    nodes: PathBuf,
    /// Edge file: `src<TAB>dst<TAB>edge_type` per line.
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Longest half-path considered; defaults to the number of edge types plus one.
    #[arg(long)]
    max_half_len: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Train these meta-paths (one per line) instead of the selected set.
    #[arg(long)]
    metapaths: Option<PathBuf>,
    #[arg(long)]
    max_half_len: Option<usize>,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// Negative samples per window.
    #[arg(long, default_value_t = 5)]
    neg: usize,
    #[arg(long, default_value_t = 30)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Learning rate reached at the end of the linear decay.
    #[arg(long, default_value_t = 0.0001)]
    min_lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// More than one worker trains racily; results are then not reproducible.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write `<out>.epoch<N>` every N epochs; 0 disables.
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Windows per triple type per epoch; derived from the graph when omitted.
    #[arg(long)]
    samples_per_type: Option<usize>,
    /// Negative distribution: uniform or degree75.
    #[arg(long, default_value = "uniform")]
    neg_dist: String,
    /// Do not divide the negative term by the sample count.
    #[arg(long)]
    no_scale_negatives: bool,
    #[arg(long, default_value = "model.mshn")]
    out: PathBuf,
    /// Loss log; defaults to `train.log` next to the checkpoint.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalLinkArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    model: PathBuf,
    /// Held-out edges, same format as the edge file.
    #[arg(long)]
    held_out: PathBuf,
    #[arg(long)]
    edge_type: String,
    /// Node type of the queries; defaults to the source type of the edge type.
    #[arg(long)]
    query_type: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    k: Vec<usize>,
}

#[derive(Debug, Args)]
struct EvalClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labels file: `label<TAB>class[,class...]` per line.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8")]
    ratio: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Meta-path id, or `all`.
    #[arg(long, default_value = "all")]
    metapath: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(GraphError, MetaPathError, EvalError, ModelError);

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } | TrainError::NonFinite(_) => {
                CliError::Diverged(e.to_string())
            }
            TrainError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MSHINE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{}", e.render());
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match cli.command {
        Command::SelectMetapaths(a) => select_metapaths(&a),
        Command::Train(a) => train(&a),
        Command::Export(a) => export(&a),
        Command::EvalLink(a) => eval_link(&a),
        Command::EvalClassify(a) => eval_classify(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mshine: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_graph(a: &GraphArgs) -> Result<TypedGraph, CliError> {
    let g = graph::load_graph(&a.nodes, &a.edges)?;
    info!("loaded {} nodes and {} edges", g.num_nodes(), g.num_edges());
    Ok(g)
}

fn initial_paths(g: &TypedGraph, max_half_len: Option<usize>) -> Result<MetaPathSet, CliError> {
    let schema = g.schema();
    let bound = max_half_len.unwrap_or_else(|| metapath::default_max_half_len(schema));
    if bound == 0 {
        return Err(CliError::Usage("--max-half-len must be at least 1".into()));
    }
    MetaPathSet::new(metapath::select_initial_with(schema, bound))
        .map_err(|e| CliError::Data(format!("meta-path selection: {e}")))
}

fn select_metapaths(a: &SelectArgs) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let paths = initial_paths(&g, a.max_half_len)?;
    let mut out = io::stdout().lock();
    for p in paths.paths() {
        let triples = metapath::decompose(p)?;
        let ids: Vec<String> = triples.iter().map(|t| t.id(g.schema())).collect();
        writeln!(out, "{}\t{}", p.id(), ids.join(",")).map_err(io_error(Path::new("stdout")))?;
    }
    Ok(())
}

fn save_checkpoint(
    path: &Path,
    params: &mshine::model::ModelParams,
    g: &TypedGraph,
    path_ids: &[String],
) -> Result<(), CliError> {
    write_atomic(path, |w| write_checkpoint(w, params, g.labels(), path_ids))
        .map_err(io_error(path))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn train(a: &TrainArgs) -> Result<(), CliError> {
    let neg_distribution: NegDistribution = a
        .neg_dist
        .parse()
        .map_err(|e: mshine::sampler::SampleError| CliError::Usage(e.to_string()))?;
    let config = TrainConfig {
        dim: a.dim,
        negative_k: a.neg,
        batch_size: a.batch,
        epochs: a.epochs,
        learning_rate: a.lr,
        min_learning_rate: a.min_lr,
        seed: a.seed,
        neg_distribution,
        samples_per_type: a.samples_per_type,
        checkpoint_every: a.checkpoint_every,
        scale_negatives: !a.no_scale_negatives,
        workers: a.workers,
    };
    config.validate()?;
    let mut manifest = RunManifest::new(
        "train",
        a.seed,
        json!({
            "dim": config.dim,
            "neg": config.negative_k,
            "batch": config.batch_size,
            "epochs": config.epochs,
            "lr": config.learning_rate,
            "min_lr": config.min_learning_rate,
            "workers": config.workers,
            "checkpoint_every": config.checkpoint_every,
            "samples_per_type": config.samples_per_type,
            "neg_dist": config.neg_distribution.to_string(),
            "scale_negatives": config.scale_negatives,
            "max_half_len": a.max_half_len,
            "metapaths_file": a.metapaths,
        }),
    );
    manifest.deterministic = config.workers == 1;
    if !manifest.deterministic {
        warn!(
            "{} workers: training is racy and not reproducible",
            config.workers
        );
    }

    let g = manifest.timed("load", || load_graph(&a.graph))?;
    manifest
        .add_input(&a.graph.nodes)
        .map_err(io_error(&a.graph.nodes))?;
    manifest
        .add_input(&a.graph.edges)
        .map_err(io_error(&a.graph.edges))?;
    let paths = manifest.timed("select", || match &a.metapaths {
        Some(file) => {
            let text = fs::read_to_string(file).map_err(io_error(file))?;
            MetaPathSet::parse(g.schema(), &text)
                .map_err(|e| CliError::Data(format!("{}: {e}", file.display())))
        }
        None => initial_paths(&g, a.max_half_len),
    })?;
    if let Some(file) = &a.metapaths {
        manifest.add_input(file).map_err(io_error(file))?;
    }
    let path_ids: Vec<String> = paths.paths().iter().map(|p| p.id().to_string()).collect();
    info!(
        "training {} meta-paths over {} triple types",
        paths.len(),
        paths.index().len()
    );
    manifest.metapaths = path_ids.clone();

    let log_path = a.log.clone().unwrap_or_else(|| {
        a.out
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .join("train.log")
    });
    let mut log = io::BufWriter::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_error(&log_path))?,
    );
    let mut periodic = Vec::new();
    let output = manifest.timed("train", || {
        trainer::train_with(&g, &paths, &config, |event| {
            match event {
                Progress::Epoch(r) => {
                    writeln!(log, "{}\t{}\t{}", r.epoch, r.loss_pre, r.loss_state)?;
                    log.flush()?;
                    info!(
                        "epoch {}: loss_pre {:.6} loss_state {:.6}",
                        r.epoch, r.loss_pre, r.loss_state
                    );
                }
                Progress::Checkpoint { epoch, params } => {
                    let path = with_suffix(&a.out, &format!(".epoch{epoch}"));
                    write_atomic(&path, |w| {
                        write_checkpoint(w, params, g.labels(), &path_ids)
                    })?;
                    periodic.push(path);
                }
            }
            Ok(())
        })
    })?;
    manifest.timed("write", || {
        save_checkpoint(&a.out, &output.params, &g, &path_ids)
    })?;
    for p in periodic.iter().chain([&a.out]) {
        manifest.add_output(p).map_err(io_error(p))?;
    }
    let mpath = manifest_path(&a.out);
    manifest.write(&mpath).map_err(io_error(&mpath))?;
    if let Some(last) = output.reports.last() {
        info!("final loss {:.6}", last.total());
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let f = File::open(path).map_err(io_error(path))?;
    read_checkpoint(BufReader::new(f))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn export(a: &ExportArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&a.model)?;
    let mut manifest = RunManifest::new("export", 0, json!({}));
    manifest.add_input(&a.model).map_err(io_error(&a.model))?;
    manifest.metapaths = ckpt.path_ids.clone();
    let files = manifest.timed("export", || {
        eval::export_embeddings(&ckpt.params, &ckpt.labels, &ckpt.path_ids, &a.out)
    })?;
    for f in &files {
        manifest.add_output(f).map_err(io_error(f))?;
        println!("{}", f.display());
    }
    let mpath = a.out.join("manifest.json");
    manifest.write(&mpath).map_err(io_error(&mpath))
}

/// Rebuilds the checkpoint's meta-path set over `g` and checks the node order.
fn paths_for(ckpt: &Checkpoint, g: &TypedGraph) -> Result<MetaPathSet, CliError> {
    if ckpt.labels != g.labels() {
        return Err(CliError::Data(
            "checkpoint nodes differ from the graph's nodes".into(),
        ));
    }
    let paths = MetaPathSet::parse(g.schema(), &ckpt.path_ids.join("\n"))?;
    if paths.index().len() != ckpt.params.num_triples() {
        return Err(CliError::Data(
            "checkpoint triple types differ from the graph's schema".into(),
        ));
    }
    Ok(paths)
}

fn eval_link(a: &EvalLinkArgs) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let ckpt = load_checkpoint(&a.model)?;
    let paths = paths_for(&ckpt, &g)?;
    let schema = g.schema();
    let edge_type = schema
        .edge_type(&a.edge_type)
        .ok_or_else(|| CliError::Usage(format!("unknown edge type `{}`", a.edge_type)))?;
    let query_type = match &a.query_type {
        Some(name) => schema
            .node_type(name)
            .ok_or_else(|| CliError::Usage(format!("unknown node type `{name}`")))?,
        None => schema.edge_def(edge_type).ends.0,
    };
    let file = File::open(&a.held_out).map_err(io_error(&a.held_out))?;
    let held_out = graph::read_edge_list(&g, file, &a.held_out.display().to_string())?;
    let task = LinkTask::new(&g, &paths, edge_type, query_type)?;
    let (report, _) = eval::evaluate_links(&ckpt.params, &g, &paths, &task, &held_out, &a.k)
        .map_err(|e| match e {
            EvalError::InvalidK => CliError::Usage(e.to_string()),
            e => e.into(),
        })?;
    let mut out = io::stdout().lock();
    let mut rows = vec![("queries".to_string(), report.queries.to_string())];
    for (i, k) in report.ks.iter().enumerate() {
        rows.push((format!("pre@{k}"), format!("{:.6}", report.precision[i])));
        rows.push((format!("rec@{k}"), format!("{:.6}", report.recall[i])));
        rows.push((format!("map@{k}"), format!("{:.6}", report.map[i])));
    }
    rows.push(("mrr".into(), format!("{:.6}", report.mrr)));
    rows.push(("random_mrr".into(), format!("{:.6}", report.random_mrr)));
    writeln!(out, "metric\tvalue")
        .and_then(|_| rows.iter().try_for_each(|(m, v)| writeln!(out, "{m}\t{v}")))
        .map_err(io_error(Path::new("stdout")))
}

fn eval_classify(a: &EvalClassifyArgs) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&a.model)?;
    let index: std::collections::HashMap<&str, u32> = ckpt
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u32))
        .collect();
    let file = File::open(&a.labels).map_err(io_error(&a.labels))?;
    let labels = eval::read_labels(file, &a.labels.display().to_string(), |l| {
        index.get(l).map(|&i| mshine::graph::NodeId(i))
    })?;
    let selected: Vec<PathId> = if a.metapath == "all" {
        (0..ckpt.path_ids.len()).map(|i| PathId(i as u32)).collect()
    } else {
        let i = ckpt
            .path_ids
            .iter()
            .position(|id| *id == a.metapath)
            .ok_or_else(|| {
                CliError::Usage(format!("checkpoint has no meta-path `{}`", a.metapath))
            })?;
        vec![PathId(i as u32)]
    };
    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock<'_>, line: String| {
        writeln!(out, "{line}").map_err(io_error(Path::new("stdout")))
    };
    w(&mut out, "metapath\tratio\tf1_macro\tf1_micro".into())?;
    for &m in &selected {
        let features: Vec<Vec<f64>> = labels
            .nodes
            .iter()
            .map(|&v| ckpt.params.decode_basic(v, m))
            .collect();
        for &ratio in &a.ratio {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.wrapping_add(CLASSIFY_SEED_OFFSET));
            let s = eval::classify(
                &features,
                &labels.labels,
                labels.classes.len(),
                ratio,
                a.reps,
                &mut rng,
            )
            .map_err(|e| match e {
                EvalError::InvalidRatio(_) => CliError::Usage(e.to_string()),
                e => e.into(),
            })?;
            w(
                &mut out,
                format!(
                    "{}\t{ratio}\t{:.6}\t{:.6}",
                    ckpt.path_ids[m.index()],
                    s.macro_f1,
                    s.micro_f1
                ),
            )?;
        }
    }
    Ok(())
}
