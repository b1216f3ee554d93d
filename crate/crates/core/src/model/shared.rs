//! Lock-free parameter store for racy multi-worker training.
//!
//! Sparse rows are read and written with relaxed atomics, so concurrent
//! updates to the same row may interleave and lose increments. Only the dense
//! transforms are guarded, since every window touches them.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use super::{ModelParams, ParamSource, Table, Tensor};

#[derive(Debug)]
struct AtomicTable {
    cols: usize,
    data: Vec<AtomicU64>,
}

impl AtomicTable {
    fn from_table(t: &Table) -> Self {
        AtomicTable {
            cols: t.cols(),
            data: t
                .as_slice()
                .iter()
                .map(|v| AtomicU64::new(v.to_bits()))
                .collect(),
        }
    }

    fn to_table(&self) -> Table {
        let rows = self.data.len().checked_div(self.cols).unwrap_or(0);
        Table::from_vec(
            rows,
            self.cols,
            self.data
                .iter()
                .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
                .collect(),
        )
    }

    #[inline]
    fn row(&self, i: usize) -> &[AtomicU64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug)]
pub struct SharedParams {
    dim: usize,
    tables: Vec<AtomicTable>,
    dense_lock: Mutex<()>,
}

impl SharedParams {
    pub fn new(p: &ModelParams) -> Self {
        SharedParams {
            dim: p.dim(),
            tables: Tensor::ALL
                .iter()
                .map(|&t| AtomicTable::from_table(p.table(t)))
                .collect(),
            dense_lock: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> ModelParams {
        let tables: Vec<Table> = self.tables.iter().map(AtomicTable::to_table).collect();
        ModelParams::from_tables(tables.try_into().expect("ten tensors")).expect("shapes preserved")
    }

    /// `row -= lr * grad` for one sparse row; not atomic as a whole.
    pub fn sub_row(&self, t: Tensor, row: usize, lr: f64, grad: &[f64]) {
        for (cell, g) in self.tables[t as usize].row(row).iter().zip(grad) {
            let v = f64::from_bits(cell.load(Ordering::Relaxed));
            cell.store((v - lr * g).to_bits(), Ordering::Relaxed);
        }
    }

    /// Applies all dense updates inside one critical section.
    pub fn sub_dense(&self, updates: &[(Tensor, &[f64])], lr: f64) {
        let _guard = self.dense_lock.lock().unwrap_or_else(|e| e.into_inner());
        for &(t, grad) in updates {
            for (cell, g) in self.tables[t as usize].data.iter().zip(grad) {
                let v = f64::from_bits(cell.load(Ordering::Relaxed));
                cell.store((v - lr * g).to_bits(), Ordering::Relaxed);
            }
        }
    }
}

impl ParamSource for SharedParams {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn read_row(&self, t: Tensor, row: usize, out: &mut [f64]) {
        for (o, cell) in out.iter_mut().zip(self.tables[t as usize].row(row)) {
            *o = f64::from_bits(cell.load(Ordering::Relaxed));
        }
    }
}
