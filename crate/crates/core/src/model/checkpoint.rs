//! Binary checkpoint format.
//!
//! ```text
//! "MSHN1"
//! u64 N, u64 d, u64 |TripleType|, u64 |MetaPath|       (little-endian)
//! X, H, W_hy, W_xh, W_hh, W_rh, R, V_x, V_h, V_y       (row-major f32 LE)
//! u64 count, then count x (u64 len, UTF-8 bytes)       node labels
//! u64 count, then count x (u64 len, UTF-8 bytes)       meta-path ids
//! ```

use std::io::{self, Read, Write};

use super::{ModelError, ModelParams, Table, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"MSHN1";

/// Strings longer than this are treated as corruption rather than allocated.
const MAX_STRING_LEN: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Original node labels, indexed by dense node id.
    pub labels: Vec<String>,
    /// Canonical meta-path ids, indexed by path id.
    pub path_ids: Vec<String>,
}

pub fn write_checkpoint<W: Write>(
    mut w: W,
    params: &ModelParams,
    labels: &[String],
    path_ids: &[String],
) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    for n in [
        params.num_nodes(),
        params.dim(),
        params.num_triples(),
        params.num_paths(),
    ] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut buf = Vec::new();
    for t in Tensor::ALL {
        buf.clear();
        for &v in params.table(t).as_slice() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    write_strings(&mut w, labels)?;
    write_strings(&mut w, path_ids)?;
    w.flush()
}

fn write_strings<W: Write>(w: &mut W, items: &[String]) -> io::Result<()> {
    w.write_all(&(items.len() as u64).to_le_bytes())?;
    for s in items {
        w.write_all(&(s.len() as u64).to_le_bytes())?;
        w.write_all(s.as_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint, ModelError> {
    let mut magic = [0u8; 5];
    read_exact(&mut r, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::BadMagic);
    }
    let n = read_count(&mut r)?;
    let d = read_count(&mut r)?;
    let triples = read_count(&mut r)?;
    let paths = read_count(&mut r)?;
    let tables = Tensor::ALL.map(|t| match t {
        Tensor::X | Tensor::H | Tensor::Why => (n, d),
        Tensor::Wxh | Tensor::Whh | Tensor::Wrh => (d, d),
        Tensor::R => (triples, d),
        Tensor::Vx | Tensor::Vh | Tensor::Vy => (paths, d),
    });
    let mut loaded = Vec::with_capacity(10);
    for (rows, cols) in tables {
        let len = rows
            .checked_mul(cols)
            .and_then(|l| l.checked_mul(4))
            .ok_or_else(|| ModelError::Corrupt("tensor size overflows".into()))?;
        let mut bytes = Vec::new();
        (&mut r).take(len as u64).read_to_end(&mut bytes)?;
        if bytes.len() != len {
            return Err(ModelError::Corrupt("tensor data ends early".into()));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        loaded.push(Table::from_vec(rows, cols, data));
    }
    let tables: [Table; 10] = loaded.try_into().expect("ten tensors");
    let params = ModelParams::from_tables(tables)?;
    let labels = read_strings(&mut r)?;
    let path_ids = read_strings(&mut r)?;
    if labels.len() != n {
        return Err(ModelError::Corrupt(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    if path_ids.len() != paths {
        return Err(ModelError::Corrupt(format!(
            "{} path ids for {paths} paths",
            path_ids.len()
        )));
    }
    Ok(Checkpoint {
        params,
        labels,
        path_ids,
    })
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => ModelError::Corrupt("unexpected end of file".into()),
        _ => ModelError::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, ModelError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_count<R: Read>(r: &mut R) -> Result<usize, ModelError> {
    usize::try_from(read_u64(r)?).map_err(|_| ModelError::Corrupt("count overflows".into()))
}

fn read_strings<R: Read>(r: &mut R) -> Result<Vec<String>, ModelError> {
    let count = read_u64(r)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = read_u64(r)?;
        if len > MAX_STRING_LEN {
            return Err(ModelError::Corrupt(format!("string of length {len}")));
        }
        let mut bytes = vec![0u8; len as usize];
        read_exact(r, &mut bytes)?;
        out.push(
            String::from_utf8(bytes)
                .map_err(|_| ModelError::Corrupt("label is not UTF-8".into()))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (ModelParams, Vec<String>, Vec<String>) {
        let p = ModelParams::init(3, 4, 2, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let labels = vec!["a".into(), "bé".into(), "c".into()];
        let ids = vec!["A[AB]B[AB]A".into(), "B[AB]A[AB]B".into()];
        (p, labels, ids)
    }

    #[test]
    fn round_trip_is_f32_exact() {
        let (p, labels, ids) = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p, &labels, &ids).unwrap();
        assert_eq!(&bytes[..5], b"MSHN1");
        let ck = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(ck.labels, labels);
        assert_eq!(ck.path_ids, ids);
        for t in Tensor::ALL {
            let a = p.table(t).as_slice();
            let b = ck.params.table(t).as_slice();
            assert!(
                a.iter().zip(b).all(|(x, y)| (*x as f32) as f64 == *y),
                "{t}"
            );
        }
        // a second write of the reloaded model is byte-identical
        let mut again = Vec::new();
        write_checkpoint(&mut again, &ck.params, &ck.labels, &ck.path_ids).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn layout_size() {
        let (p, labels, ids) = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p, &labels, &ids).unwrap();
        let floats = 3 * 4 * 3 + 4 * 4 * 3 + 2 * 4 + 2 * 4 * 3;
        let strings = 8 + 3 * 8 + 1 + 3 + 1 + 8 + 2 * 8 + 11 + 11;
        assert_eq!(bytes.len(), 5 + 32 + floats * 4 + strings);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let (p, labels, ids) = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p, &labels, &ids).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_checkpoint(bad.as_slice()),
            Err(ModelError::BadMagic)
        ));
        for cut in [3, 20, 60, bytes.len() - 1] {
            assert!(
                matches!(read_checkpoint(&bytes[..cut]), Err(ModelError::Corrupt(_))),
                "cut {cut}"
            );
        }
    }
}
