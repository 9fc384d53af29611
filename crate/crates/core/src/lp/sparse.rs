use crate::scalar::Scalar;

/// Compressed sparse column matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; ncols];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c] += 1;
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            col_ptr[c + 1] = col_ptr[c] + counts[c];
        }
        let mut fill = col_ptr.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            rows[fill[c]] = r;
            vals[fill[c]] = v;
            fill[c] += 1;
        }

        let mut out_ptr = Vec::with_capacity(ncols + 1);
        let mut out_rows = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        out_ptr.push(0);
        let mut entries: Vec<(usize, T)> = Vec::new();
        for c in 0..ncols {
            entries.clear();
            entries.extend((col_ptr[c]..col_ptr[c + 1]).map(|k| (rows[k], vals[k])));
            entries.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < entries.len() {
                let r = entries[k].0;
                let mut v = T::zero();
                while k < entries.len() && entries[k].0 == r {
                    v += entries[k].1;
                    k += 1;
                }
                if v != T::zero() {
                    out_rows.push(r);
                    out_vals.push(v);
                }
            }
            out_ptr.push(out_rows.len());
        }
        CscMatrix { nrows, ncols, col_ptr: out_ptr, row_idx: out_rows, values: out_vals }
    }

    /// Builds a matrix from dense rows.
    pub fn from_dense(rows: &[Vec<T>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix { nrows, ncols, col_ptr: vec![0; ncols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (rows, vals) = self.col(j);
        rows.iter().position(|&r| r == i).map_or(T::zero(), |k| vals[k])
    }

    /// Returns the transpose, which doubles as a row-major view of `self`.
    pub fn transpose(&self) -> CscMatrix<T> {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.row_idx {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut rows = vec![0usize; self.nnz()];
        let mut vals = vec![T::zero(); self.nnz()];
        for j in 0..self.ncols {
            let (ri, rv) = self.col(j);
            for (&r, &v) in ri.iter().zip(rv) {
                rows[fill[r]] = j;
                vals[fill[r]] = v;
                fill[r] += 1;
            }
        }
        CscMatrix { nrows: self.ncols, ncols: self.nrows, col_ptr: counts, row_idx: rows, values: vals }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == T::zero() {
                continue;
            }
            let (ri, rv) = self.col(j);
            for (&r, &v) in ri.iter().zip(rv) {
                y[r] += v * xj;
            }
        }
        y
    }

    /// `z = A^T y`
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.nrows);
        (0..self.ncols)
            .map(|j| {
                let (ri, rv) = self.col(j);
                ri.iter().zip(rv).map(|(&r, &v)| v * y[r]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for j in 0..self.ncols {
            let (ri, rv) = self.col(j);
            for (&r, &v) in ri.iter().zip(rv) {
                out[r][j] = v;
            }
        }
        out
    }
}
