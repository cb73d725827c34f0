//! Compressed-row complex sparse matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::C64;

/// Compressed sparse row matrix with complex entries.
///
/// Column indices within a row are strictly increasing. Matrices flagged
/// Hermitian are stored in full and satisfy `A[i][j] == conj(A[j][i])` bit for
/// bit (the assembly routines guarantee this by construction).
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), vals: Vec::new(), hermitian: false }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), vals: vec![C64::new(1.0, 0.0); n], hermitian: true }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in their insertion order, which makes the result independent of
    /// anything but the triplet sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, preserving insertion order
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, C64::new(0.0, 0.0)); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            // stable sort keeps the insertion order of duplicates
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut acc = row[k].1;
                k += 1;
                while k < row.len() && row[k].0 == c {
                    acc += row[k].1;
                    k += 1;
                }
                col_idx.push(c);
                vals.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, vals, hermitian: false }
    }

    pub fn with_hermitian_flag(mut self, flag: bool) -> Self {
        self.hermitian = flag;
        self
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = C64::new(0.0, 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    /// `y = A^H x`
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == C64::new(0.0, 0.0) {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v.conj() * xi;
            }
        }
        y
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let trip: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &trip).with_hermitian_flag(self.hermitian)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = C64::new(0.0, 0.0);
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                vals.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { nrows: self.nrows, ncols: other.ncols, row_ptr, col_idx, vals, hermitian: false }
    }

    /// Replaces the matrix by `(A + A^H) / 2`, which is exactly Hermitian in
    /// floating point.
    pub fn hermitian_part(&self) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols);
        let mut trip: Vec<_> = self.triplets().map(|(i, j, v)| (i, j, v * 0.5)).collect();
        trip.extend(self.triplets().map(|(i, j, v)| (j, i, v.conj() * 0.5)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, &trip).with_hermitian_flag(true)
    }

    /// Maximum of `|A[i][j] - conj(A[j][i])|` over all stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = DMatrix::from_element(self.nrows, self.ncols, C64::new(0.0, 0.0));
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Dense principal submatrix on the (sorted or unsorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> DMatrix<C64> {
        self.submatrix(idx, idx)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        let mut pos = std::collections::HashMap::with_capacity(cols.len());
        for (k, &c) in cols.iter().enumerate() {
            pos.insert(c, k);
        }
        let mut d = DMatrix::from_element(rows.len(), cols.len(), C64::new(0.0, 0.0));
        for (a, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if let Some(&b) = pos.get(&c) {
                    d[(a, b)] = v;
                }
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale_rows_cols(&self, rows: &[f64], cols: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.col_idx[k];
                out.vals[k] *= rows[i] * cols[j];
            }
        }
        out
    }
}

/// Accumulates dense element blocks into a fixed sparsity pattern. Blocks
/// are added in call order, so the result is bit-reproducible; adding a
/// Hermitian block on `(rows, rows)` keeps the global matrix exactly
/// Hermitian.
#[derive(Clone, Debug)]
pub struct BlockAssembler {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl BlockAssembler {
    /// Pattern from the `(rows, cols)` index sets of all blocks that will be
    /// added later.
    pub fn new<'a, I>(nrows: usize, ncols: usize, blocks: I) -> Self
    where
        I: IntoIterator<Item = (&'a [usize], &'a [usize])>,
    {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (rows, cols) in blocks {
            for &r in rows {
                lists[r].extend_from_slice(cols);
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
            col_idx.extend_from_slice(l);
            row_ptr.push(col_idx.len());
            *l = Vec::new();
        }
        let vals = vec![C64::new(0.0, 0.0); col_idx.len()];
        Self { nrows, ncols, row_ptr, col_idx, vals }
    }

    /// Adds the row-major block `rows.len() x cols.len()`.
    pub fn add(&mut self, rows: &[usize], cols: &[usize], block: &[C64]) {
        debug_assert_eq!(block.len(), rows.len() * cols.len());
        for (a, &r) in rows.iter().enumerate() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let pattern = &self.col_idx[lo..hi];
            for (b, &c) in cols.iter().enumerate() {
                let k = pattern.binary_search(&c).expect("entry outside the assembly pattern");
                self.vals[lo + k] += block[a * cols.len() + b];
            }
        }
    }

    pub fn finish(self, hermitian: bool) -> CsrMatrix {
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr: self.row_ptr, col_idx: self.col_idx, vals: self.vals, hermitian }
    }
}

impl From<&CsrMatrix> for DMatrix<Complex64> {
    fn from(m: &CsrMatrix) -> Self {
        m.to_dense()
    }
}
