//! Displacement snapshot sets and the two on-disk numeric formats:
//!
//! * snapshot file: text line `snapshots <n> <count>` followed by
//!   little-endian f64 payload, column-major (one 3n-column per snapshot);
//! * matrix file: text line `matrix <rows> <cols>` followed by
//!   little-endian f64 payload, row-major.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A set of displacement snapshots (columns) with optional provenance tags.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSet {
    /// Node count; all columns have length 3n.
    pub n: usize,
    pub columns: Vec<DVector<f64>>,
    /// `(scenario name, step index)` per column; empty when loaded from disk.
    pub provenance: Vec<(String, usize)>,
}

impl SnapshotSet {
    pub fn new(n: usize) -> Self {
        SnapshotSet {
            n,
            columns: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        self.columns.len()
    }

    pub fn dofs(&self) -> usize {
        3 * self.n
    }

    pub fn push(&mut self, u: DVector<f64>, scenario: &str, step: usize) -> Result<()> {
        if u.len() != 3 * self.n {
            return Err(Error::Dimension {
                expected: 3 * self.n,
                got: u.len(),
                context: "snapshot column".into(),
            });
        }
        self.columns.push(u);
        self.provenance.push((scenario.to_string(), step));
        Ok(())
    }

    /// Dense 3n x count matrix of the columns.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dofs(), self.count());
        for (j, col) in self.columns.iter().enumerate() {
            m.column_mut(j).copy_from(col);
        }
        m
    }

    /// Keeps every `stride`-th column (a cheap corpus thinning knob).
    pub fn subsample(&self, stride: usize) -> SnapshotSet {
        let stride = stride.max(1);
        let mut out = SnapshotSet::new(self.n);
        for (j, col) in self.columns.iter().enumerate() {
            if j % stride == 0 {
                out.columns.push(col.clone());
                out.provenance
                    .push(self.provenance.get(j).cloned().unwrap_or_default());
            }
        }
        out
    }
}

pub fn save_snapshots(set: &SnapshotSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = format!("snapshots {} {}\n", set.n, set.count());
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    for col in &set.columns {
        for &x in col.iter() {
            w.write_all(&x.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotSet> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, payload) = split_header(&bytes, path)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (n, count) = match parts.as_slice() {
        ["snapshots", n, count] => (
            n.parse::<usize>()
                .map_err(|_| Error::parse(path, 1, "invalid node count"))?,
            count
                .parse::<usize>()
                .map_err(|_| Error::parse(path, 1, "invalid snapshot count"))?,
        ),
        _ => return Err(Error::parse(path, 1, "expected `snapshots <n> <count>`")),
    };
    let values = read_f64_payload(payload, 3 * n * count, path)?;
    let mut set = SnapshotSet::new(n);
    for j in 0..count {
        let col = DVector::from_column_slice(&values[j * 3 * n..(j + 1) * 3 * n]);
        set.columns.push(col);
        set.provenance.push((String::new(), j));
    }
    Ok(set)
}

pub fn save_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = format!("matrix {} {}\n", m.nrows(), m.ncols());
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, payload) = split_header(&bytes, path)?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match parts.as_slice() {
        ["matrix", r, c] => (
            r.parse::<usize>()
                .map_err(|_| Error::parse(path, 1, "invalid row count"))?,
            c.parse::<usize>()
                .map_err(|_| Error::parse(path, 1, "invalid column count"))?,
        ),
        _ => return Err(Error::parse(path, 1, "expected `matrix <rows> <cols>`")),
    };
    let values = read_f64_payload(payload, rows * cols, path)?;
    Ok(DMatrix::from_fn(rows, cols, |i, j| values[i * cols + j]))
}

fn split_header<'b>(bytes: &'b [u8], path: &Path) -> Result<(&'b str, &'b [u8])> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(path, 1, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::parse(path, 1, "header is not utf-8"))?;
    Ok((header, &bytes[newline + 1..]))
}

fn read_f64_payload(payload: &[u8], expected: usize, path: &Path) -> Result<Vec<f64>> {
    if payload.len() != expected * 8 {
        return Err(Error::parse(
            path,
            2,
            format!(
                "payload has {} bytes, expected {} (= {expected} f64 values)",
                payload.len(),
                expected * 8
            ),
        ));
    }
    let mut values = Vec::with_capacity(expected);
    let mut reader = payload;
    let mut buf = [0u8; 8];
    for _ in 0..expected {
        reader.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(values)
}
