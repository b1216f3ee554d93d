//! Link prediction, node classification and embedding export.

mod classify;
mod export;
mod link;
mod metrics;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub use classify::{classify, f1_scores, F1Scores, LogisticRegression, OneVsRest, L2_PENALTY};
pub use export::{
    embedding_file_name, export_embeddings, format_g, read_embeddings, write_embeddings,
    EmbeddingTable,
};
pub use link::{evaluate_links, rank_by_score, relevant_sets, LinkContext, LinkReport, LinkTask};
pub use metrics::{
    average_precision_at_k, expected_random_rr, map_score, mrr_score, precision_at_k, recall_at_k,
    reciprocal_rank, RankingResult,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no selected meta-path predicts `{edge_type}` edges from `{query_type}` nodes")]
    NoContext {
        edge_type: String,
        query_type: String,
    },
    #[error("edge type `{edge_type}` has no `{query_type}` endpoint")]
    QueryTypeMismatch {
        edge_type: String,
        query_type: String,
    },
    #[error("no held-out edge yields a rankable query")]
    NoQueries,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("training ratio {0} is outside (0, 1)")]
    InvalidRatio(f64),
    #[error("only {0} labeled samples")]
    TooFewSamples(usize),
    #[error("class {0} is absent from the training split after resampling")]
    LabelMissing(usize),
    #[error("{0}")]
    Mismatch(String),
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Parsed labels file: class names and, per labeled node, its class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabels {
    pub classes: Vec<String>,
    pub nodes: Vec<NodeId>,
    pub labels: Vec<Vec<usize>>,
}

/// Reads `<label>\t<class>[,<class>…]` lines. `resolve` maps a node label to
/// its id; unknown labels are an error.
pub fn read_labels<R: Read>(
    reader: R,
    name: &str,
    resolve: impl Fn(&str) -> Option<NodeId>,
) -> Result<NodeLabels, EvalError> {
    let mut class_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut rows: Vec<(NodeId, Vec<String>)> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: name.into(),
            source,
        })?;
        let malformed = |message: String| EvalError::Malformed {
            file: name.to_string(),
            line: i + 1,
            message,
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((node, classes)) = line.split_once('\t') else {
            return Err(malformed(
                "expected `<label>\\t<class>[,<class>...]`".into(),
            ));
        };
        let id = resolve(node).ok_or_else(|| malformed(format!("unknown node `{node}`")))?;
        let classes: Vec<String> = classes
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        if classes.is_empty() {
            return Err(malformed(format!("node `{node}` has no class")));
        }
        for c in &classes {
            class_ids.entry(c.clone()).or_insert(0);
        }
        rows.push((id, classes));
    }
    for (i, v) in class_ids.values_mut().enumerate() {
        *v = i;
    }
    let mut out = NodeLabels {
        classes: class_ids.keys().cloned().collect(),
        nodes: Vec::with_capacity(rows.len()),
        labels: Vec::with_capacity(rows.len()),
    };
    for (id, classes) in rows {
        let mut idx: Vec<usize> = classes.iter().map(|c| class_ids[c]).collect();
        idx.sort_unstable();
        idx.dedup();
        out.nodes.push(id);
        out.labels.push(idx);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_multi_class() {
        let text = "# comment\na\tred\nb\tblue,red\n";
        let resolve = |l: &str| match l {
            "a" => Some(NodeId(0)),
            "b" => Some(NodeId(1)),
            _ => None,
        };
        let l = read_labels(text.as_bytes(), "labels", resolve).unwrap();
        assert_eq!(l.classes, vec!["blue", "red"]);
        assert_eq!(l.labels, vec![vec![1], vec![0, 1]]);
        let err = read_labels("zz\tred\n".as_bytes(), "labels", resolve).unwrap_err();
        assert!(err.to_string().contains("labels:1"));
    }
}
