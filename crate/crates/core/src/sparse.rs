//! Compressed sparse row matrices over a shared, precomputed pattern.
//!
//! Assembly first builds a [`Pattern`] from the dense blocks every element
//! or facet touches, then scatters local matrices into it. Matrices sharing
//! a pattern can be combined entrywise without reallocation.

use std::sync::Arc;

use faer::sparse::{SparseColMat, Triplet};

use crate::{Error, Result};

/// Marker for a local degree of freedom that has no global column (for
/// example a strongly constrained boundary value).
pub const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Union of the dense blocks `rows x cols`. Entries equal to [`NONE`] are
    /// skipped.
    pub fn from_blocks<'a, I>(nrows: usize, ncols: usize, blocks: I) -> Self
    where
        I: IntoIterator<Item = (&'a [usize], &'a [usize])>,
    {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (r, c) in blocks {
            for &i in r.iter().filter(|&&i| i != NONE) {
                rows[i].extend(c.iter().copied().filter(|&j| j != NONE));
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        Pattern {
            nrows,
            ncols,
            row_ptr,
            col_idx,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|p| start + p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Pattern {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        };
        CsrMatrix {
            pattern: Arc::new(pattern),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            pattern: Arc::new(Pattern {
                nrows,
                ncols,
                row_ptr,
                col_idx,
            }),
            values,
        }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over stored entries `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows()).flat_map(move |i| {
            let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            (s..e).map(move |p| (i, self.pattern.col_idx[p], self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Scatters a row-major local block. Rows or columns equal to [`NONE`]
    /// are dropped.
    pub fn add_local(&mut self, rows: &[usize], cols: &[usize], local: &[f64]) {
        debug_assert_eq!(local.len(), rows.len() * cols.len());
        for (a, &i) in rows.iter().enumerate() {
            if i == NONE {
                continue;
            }
            let start = self.pattern.row_ptr[i];
            let row = self.pattern.row(i);
            for (b, &j) in cols.iter().enumerate() {
                if j == NONE {
                    continue;
                }
                let v = local[a * cols.len() + b];
                if v == 0.0 {
                    continue;
                }
                let p = row.binary_search(&j).expect("entry outside assembly pattern");
                self.values[start + p] += v;
            }
        }
    }

    /// `self += alpha * other`; both must share the same pattern.
    pub fn axpy(&mut self, alpha: f64, other: &CsrMatrix) -> Result<()> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && self.pattern != other.pattern {
            return Err(Error::InvalidArgument("matrix patterns differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols());
        (0..self.nrows())
            .map(|i| {
                let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
                (s..e).map(|p| self.values[p] * x[self.pattern.col_idx[p]]).sum()
            })
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows());
        let mut out = vec![0.0; self.ncols()];
        for (i, j, v) in self.iter() {
            out[j] += v * y[i];
        }
        out
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols(), self.nrows(), &t)
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols(), other.nrows());
        let mut acc = vec![0.0; other.ncols()];
        let mut mark = vec![usize::MAX; other.ncols()];
        let mut triplets = Vec::new();
        for i in 0..self.nrows() {
            let mut touched = Vec::new();
            let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            for p in s..e {
                let (k, a) = (self.pattern.col_idx[p], self.values[p]);
                let (s2, e2) = (other.pattern.row_ptr[k], other.pattern.row_ptr[k + 1]);
                for q in s2..e2 {
                    let j = other.pattern.col_idx[q];
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * other.values[q];
                }
            }
            touched.sort_unstable();
            triplets.extend(touched.into_iter().map(|j| (i, j, acc[j])));
        }
        CsrMatrix::from_triplets(self.nrows(), other.ncols(), &triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entry of `|A - A^T|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.iter().fold(0.0, |m, (i, j, v)| m.max((v - self.get(j, i)).abs()))
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows(), self.ncols(), &t)
            .map_err(|e| Error::Solver(format!("sparse matrix construction failed: {e:?}")))
    }
}
