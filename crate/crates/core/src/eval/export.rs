//! Text export of meta-path specific basic embeddings.
//!
//! One file per meta-path: a header line `N d`, then one line per node with
//! its label and `d` values in `%g` style with 6 significant digits.

use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::graph::NodeId;
use crate::metapath::PathId;
use crate::model::ModelParams;

use super::EvalError;

/// `printf("%g")` with 6 significant digits.
pub fn format_g(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{v:.*}", (5 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// File name for a meta-path: its position plus the id with brackets and
/// other unsafe characters replaced.
pub fn embedding_file_name(path: PathId, id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{:02}_{}.txt", path.index(), safe.trim_matches('_'))
}

pub fn write_embeddings<W: Write>(
    mut w: W,
    p: &ModelParams,
    labels: &[String],
    path: PathId,
) -> std::io::Result<()> {
    writeln!(w, "{} {}", p.num_nodes(), p.dim())?;
    let mut line = String::new();
    for (v, label) in labels.iter().enumerate().take(p.num_nodes()) {
        line.clear();
        line.push_str(label);
        for x in p.decode_basic(NodeId(v as u32), path) {
            line.push(' ');
            line.push_str(&format_g(x));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Writes one embedding file per meta-path into `out_dir`, creating it if needed.
pub fn export_embeddings(
    p: &ModelParams,
    labels: &[String],
    path_ids: &[String],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, EvalError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::with_capacity(path_ids.len());
    for (i, id) in path_ids.iter().enumerate() {
        let file = out_dir.join(embedding_file_name(PathId(i as u32), id));
        let f = File::create(&file).map_err(io_err(&file))?;
        write_embeddings(BufWriter::new(f), p, labels, PathId(i as u32)).map_err(io_err(&file))?;
        written.push(file);
    }
    Ok(written)
}

/// Parsed embedding file: labels and rows in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_embeddings<R: BufRead>(reader: R, name: &str) -> Result<EmbeddingTable, EvalError> {
    let malformed = |line: usize, message: String| EvalError::Malformed {
        file: name.to_string(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "missing header".into()))?;
    let header = header.map_err(|source| EvalError::Io {
        path: name.into(),
        source,
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| malformed(1, format!("bad header {header:?}")))?;
    let [n, dim] = dims[..] else {
        return Err(malformed(1, format!("bad header {header:?}")));
    };
    let mut table = EmbeddingTable {
        dim,
        labels: Vec::with_capacity(n),
        rows: Vec::with_capacity(n),
    };
    for (i, line) in lines {
        let line = line.map_err(|source| EvalError::Io {
            path: name.into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let label = fields.next().unwrap_or_default().to_string();
        let row: Vec<f64> = fields
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| malformed(i + 1, format!("{e}")))?;
        if row.len() != dim {
            return Err(malformed(
                i + 1,
                format!("expected {dim} values, found {}", row.len()),
            ));
        }
        table.labels.push(label);
        table.rows.push(row);
    }
    if table.rows.len() != n {
        return Err(malformed(
            1,
            format!("header promises {n} rows, found {}", table.rows.len()),
        ));
    }
    Ok(table)
}
