//! Symmetric sparse matrices in compressed row storage, with Matrix Market
//! and plain coordinate-pattern export.

use crate::{Error, Result};
use rayon::prelude::*;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Square sparse matrix in CSR form. Column indices are sorted within each
/// row; the full (mirrored) entry set of a symmetric matrix is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Build from coordinate triplets. Duplicate positions are summed.
    pub fn from_coo(
        n: usize,
        mut entries: Vec<(u32, u32, f64)>,
        symmetric: bool,
    ) -> Result<Self> {
        if n > u32::MAX as usize {
            return Err(Error::ResourceGuard("matrix dimension exceeds u32".into()));
        }
        entries.par_sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_idx: Vec<u32> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut rows: Vec<u32> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if r as usize >= n || c as usize >= n {
                return Err(Error::InvalidParameter("COO index out of range".into()));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter("non-finite matrix entry".into()));
            }
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
            symmetric,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries (both triangles of a symmetric matrix).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric_flagged(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`, rows in parallel (deterministic per row).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *yr = acc;
        });
    }

    /// Largest asymmetry `max |A_ij - A_ji|` (structural mismatches count with
    /// the missing side as zero).
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c as usize, r)).abs());
            }
        }
        worst
    }

    /// Write in Matrix Market coordinate format. With `symmetric_header` only
    /// the lower triangle is written under a `symmetric` qualifier, otherwise
    /// all stored entries under `general`.
    pub fn write_matrix_market(&self, path: &Path, symmetric_header: bool) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        if symmetric_header {
            writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
            let nnz_lower = (0..self.n)
                .map(|r| {
                    let (cols, _) = self.row(r);
                    cols.iter().filter(|&&c| (c as usize) <= r).count()
                })
                .sum::<usize>();
            writeln!(w, "{} {} {}", self.n, self.n, nnz_lower)?;
            for r in 0..self.n {
                let (cols, vals) = self.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    if (*c as usize) <= r {
                        writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
                    }
                }
            }
        } else {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
            for r in 0..self.n {
                let (cols, vals) = self.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
                }
            }
        }
        Ok(())
    }

    /// Read a real coordinate Matrix Market file written by this crate.
    pub fn read_matrix_market(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty matrix market file".into()))??;
        let header = header.to_lowercase();
        if !header.starts_with("%%matrixmarket matrix coordinate real") {
            return Err(Error::InvalidParameter(format!(
                "unsupported matrix market header: {header}"
            )));
        }
        let symmetric = header.contains("symmetric");
        let mut size_line = String::new();
        for line in lines.by_ref() {
            let line = line?;
            if !line.trim_start().starts_with('%') && !line.trim().is_empty() {
                size_line = line;
                break;
            }
        }
        let dims: Vec<usize> = size_line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("bad size line: {e}")))?;
        if dims.len() != 3 || dims[0] != dims[1] {
            return Err(Error::InvalidParameter("expected square matrix".into()));
        }
        let n = dims[0];
        let mut entries = Vec::with_capacity(dims[2]);
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let mut it = t.split_whitespace();
            let r: usize = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidParameter("bad entry line".into()))?;
            let c: usize = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidParameter("bad entry line".into()))?;
            let v: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidParameter("bad entry line".into()))?;
            entries.push(((r - 1) as u32, (c - 1) as u32, v));
            if symmetric && r != c {
                entries.push(((c - 1) as u32, (r - 1) as u32, v));
            }
        }
        Self::from_coo(n, entries, symmetric)
    }

    /// Write the stored nonzero coordinates as 1-based `row col` lines,
    /// suitable for sparsity-pattern plots.
    pub fn write_pattern(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        for r in 0..self.n {
            let (cols, _) = self.row(r);
            for c in cols {
                writeln!(w, "{} {}", r + 1, c + 1)?;
            }
        }
        Ok(())
    }
}
