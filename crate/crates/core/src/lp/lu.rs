//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! The factorization is a right-looking Gaussian elimination with Markowitz
//! pivot selection and threshold partial pivoting. Singleton columns and rows
//! are eliminated first, so triangular bases factor without fill. Basis
//! changes are appended as eta columns until the next refactorization.

use crate::scalar::Scalar;

/// Relative threshold for partial pivoting.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Number of candidate columns/rows examined by the Markowitz search.
const MARKOWITZ_CANDIDATES: usize = 4;

/// Basis positions that could not be pivoted and rows left uncovered.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub cols: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor<T> {
    dim: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    diag: Vec<T>,
    // L multipliers per elimination step
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<T>,
    // U rows per step: (column position, value)
    ur_start: Vec<usize>,
    ur_idx: Vec<usize>,
    ur_val: Vec<T>,
    // U columns per step: (row index of an earlier pivot, value)
    uc_start: Vec<usize>,
    uc_idx: Vec<usize>,
    uc_val: Vec<T>,
    // product-form etas
    eta_pos: Vec<usize>,
    eta_piv: Vec<T>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<T>,
    work: Vec<T>,
}

/// Lazily maintained buckets of indices keyed by their current count.
struct CountBuckets {
    buckets: Vec<Vec<usize>>,
}

impl CountBuckets {
    fn new(dim: usize) -> Self {
        CountBuckets { buckets: vec![Vec::new(); dim + 2] }
    }

    fn push(&mut self, count: usize, idx: usize) {
        if count < self.buckets.len() {
            self.buckets[count].push(idx);
        }
    }

    /// Collects up to `limit` valid indices with the smallest positive count.
    fn smallest(&mut self, counts: &[usize], active: &[bool], limit: usize, out: &mut Vec<usize>) {
        out.clear();
        for c in 1..self.buckets.len() {
            let bucket = &mut self.buckets[c];
            let mut k = 0;
            while k < bucket.len() {
                let idx = bucket[k];
                if !active[idx] || counts[idx] != c || out.contains(&idx) {
                    bucket.swap_remove(k);
                    continue;
                }
                out.push(idx);
                if out.len() >= limit {
                    return;
                }
                k += 1;
            }
            if !out.is_empty() {
                return;
            }
        }
    }
}

impl<T: Scalar> BasisFactor<T> {
    pub(crate) fn num_etas(&self) -> usize {
        self.eta_pos.len()
    }

    pub(crate) fn eta_nnz(&self) -> usize {
        self.eta_idx.len()
    }

    pub(crate) fn lu_nnz(&self) -> usize {
        self.l_idx.len() + self.ur_idx.len() + self.dim
    }

    /// Factorizes the square matrix whose column `k` is `columns[k]`, given as
    /// `(row, value)` pairs.
    pub(crate) fn factorize(dim: usize, columns: Vec<Vec<(usize, T)>>) -> Result<Self, Singular> {
        assert_eq!(columns.len(), dim);
        let mut cols = columns;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); dim];
        let mut max_abs = T::zero();
        for (j, col) in cols.iter_mut().enumerate() {
            col.retain(|e| e.1 != T::zero());
            for &(i, v) in col.iter() {
                rows[i].push(j);
                max_abs = max_abs.max(v.abs());
            }
        }
        let abs_tol = T::pivot_tol() * T::lit(1e-3) * max_abs.max(T::one());

        let mut col_count: Vec<usize> = cols.iter().map(Vec::len).collect();
        let mut row_count: Vec<usize> = rows.iter().map(Vec::len).collect();
        let mut col_active = vec![true; dim];
        let mut row_active = vec![true; dim];
        let mut col_buckets = CountBuckets::new(dim);
        let mut row_buckets = CountBuckets::new(dim);
        for j in 0..dim {
            col_buckets.push(col_count[j], j);
            row_buckets.push(row_count[j], j);
        }

        let mut f = BasisFactor {
            dim,
            l_start: vec![0],
            ur_start: vec![0],
            eta_start: vec![0],
            work: vec![T::zero(); dim],
            ..Default::default()
        };
        let mut mark = vec![0usize; dim];
        let mut cand = Vec::with_capacity(MARKOWITZ_CANDIDATES);
        let mut l_entries: Vec<(usize, T)> = Vec::new();
        let mut u_entries: Vec<(usize, T)> = Vec::new();
        let mut missing_cols = Vec::new();

        let active_max = |col: &[(usize, T)], row_active: &[bool]| -> T {
            col.iter().filter(|e| row_active[e.0]).fold(T::zero(), |m, e| m.max(e.1.abs()))
        };

        for _step in 0..dim {
            let mut pivot: Option<(usize, usize, T)> = None;

            col_buckets.smallest(&col_count, &col_active, MARKOWITZ_CANDIDATES, &mut cand);
            if cand.is_empty() {
                break;
            }
            let min_col_count = col_count[cand[0]];
            if min_col_count == 1 {
                for &j in &cand {
                    if let Some(&(i, v)) = cols[j].iter().find(|e| row_active[e.0]) {
                        if v.abs() > abs_tol {
                            pivot = Some((i, j, v));
                            break;
                        }
                    }
                }
            }

            if pivot.is_none() {
                let mut best: Option<(usize, usize, T, usize)> = None;
                let consider = |best: &mut Option<(usize, usize, T, usize)>, i: usize, j: usize, v: T, cost: usize| {
                    let better = match best {
                        None => true,
                        Some((_, _, bv, bc)) => cost < *bc || (cost == *bc && v.abs() > bv.abs()),
                    };
                    if better {
                        *best = Some((i, j, v, cost));
                    }
                };
                for &j in &cand {
                    let cmax = active_max(&cols[j], &row_active);
                    for &(i, v) in cols[j].iter().filter(|e| row_active[e.0]) {
                        if v.abs() >= T::lit(PIVOT_THRESHOLD) * cmax && v.abs() > abs_tol {
                            let cost = (row_count[i] - 1) * (col_count[j] - 1);
                            consider(&mut best, i, j, v, cost);
                        }
                    }
                }
                let mut rcand = Vec::with_capacity(MARKOWITZ_CANDIDATES);
                row_buckets.smallest(&row_count, &row_active, MARKOWITZ_CANDIDATES, &mut rcand);
                for &i in &rcand {
                    for &j in rows[i].iter() {
                        if !col_active[j] {
                            continue;
                        }
                        let Some(&(_, v)) = cols[j].iter().find(|e| e.0 == i) else { continue };
                        let cmax = active_max(&cols[j], &row_active);
                        if v.abs() >= T::lit(PIVOT_THRESHOLD) * cmax && v.abs() > abs_tol {
                            let cost = (row_count[i] - 1) * (col_count[j] - 1);
                            consider(&mut best, i, j, v, cost);
                        }
                    }
                }
                if best.is_none() {
                    // fall back to the largest remaining entry of any candidate column
                    for &j in &cand {
                        for &(i, v) in cols[j].iter().filter(|e| row_active[e.0]) {
                            if v.abs() > abs_tol {
                                consider(&mut best, i, j, v, 0);
                            }
                        }
                    }
                }
                match best {
                    Some((i, j, v, _)) => pivot = Some((i, j, v)),
                    None => {
                        // numerically empty candidates
                        for &j in &cand {
                            col_active[j] = false;
                            missing_cols.push(j);
                            for &(i, _) in cols[j].iter().filter(|e| row_active[e.0]) {
                                row_count[i] -= 1;
                                row_buckets.push(row_count[i], i);
                            }
                        }
                        continue;
                    }
                }
            }

            let (p, q, v) = pivot.expect("pivot chosen");

            l_entries.clear();
            for &(i, a) in cols[q].iter() {
                if i != p && row_active[i] {
                    l_entries.push((i, a / v));
                }
            }
            u_entries.clear();
            for &j in rows[p].iter() {
                if j != q && col_active[j] {
                    if let Some(&(_, a)) = cols[j].iter().find(|e| e.0 == p) {
                        u_entries.push((j, a));
                    }
                }
            }

            row_active[p] = false;
            col_active[q] = false;

            f.piv_row.push(p);
            f.piv_col.push(q);
            f.diag.push(v);
            for &(i, l) in &l_entries {
                f.l_idx.push(i);
                f.l_val.push(l);
                row_count[i] -= 1;
            }
            f.l_start.push(f.l_idx.len());
            for &(j, a) in &u_entries {
                f.ur_idx.push(j);
                f.ur_val.push(a);
            }
            f.ur_start.push(f.ur_idx.len());

            for &(j, a_pj) in &u_entries {
                col_count[j] -= 1;
                let col = &mut cols[j];
                col.retain(|e| row_active[e.0]);
                for (k, e) in col.iter().enumerate() {
                    mark[e.0] = k + 1;
                }
                for &(i, l) in &l_entries {
                    let delta = -(l * a_pj);
                    if mark[i] > 0 {
                        col[mark[i] - 1].1 += delta;
                    } else {
                        col.push((i, delta));
                        mark[i] = col.len();
                        rows[i].push(j);
                        row_count[i] += 1;
                        col_count[j] += 1;
                    }
                }
                for e in col.iter() {
                    mark[e.0] = 0;
                }
                col_buckets.push(col_count[j], j);
            }
            for &(i, _) in &l_entries {
                row_buckets.push(row_count[i], i);
            }
        }

        if f.piv_row.len() < dim {
            for j in 0..dim {
                if col_active[j] && !missing_cols.contains(&j) {
                    missing_cols.push(j);
                }
            }
            let rows_left: Vec<usize> = (0..dim).filter(|&i| row_active[i]).collect();
            missing_cols.sort_unstable();
            return Err(Singular { cols: missing_cols, rows: rows_left });
        }

        f.build_u_columns();
        Ok(f)
    }

    fn build_u_columns(&mut self) {
        let steps = self.piv_row.len();
        let mut step_of_col = vec![0usize; self.dim];
        for (k, &q) in self.piv_col.iter().enumerate() {
            step_of_col[q] = k;
        }
        let mut counts = vec![0usize; steps + 1];
        for &j in &self.ur_idx {
            counts[step_of_col[j] + 1] += 1;
        }
        for k in 0..steps {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        self.uc_idx = vec![0; self.ur_idx.len()];
        self.uc_val = vec![T::zero(); self.ur_idx.len()];
        for k in 0..steps {
            for e in self.ur_start[k]..self.ur_start[k + 1] {
                let kk = step_of_col[self.ur_idx[e]];
                self.uc_idx[fill[kk]] = self.piv_row[k];
                self.uc_val[fill[kk]] = self.ur_val[e];
                fill[kk] += 1;
            }
        }
        self.uc_start = counts;
    }

    /// Solves `B x = b` in place: `rhs` is indexed by row on input and by basis
    /// position on output.
    pub(crate) fn ftran(&mut self, rhs: &mut [T]) {
        let steps = self.piv_row.len();
        for k in 0..steps {
            let bp = rhs[self.piv_row[k]];
            if bp != T::zero() {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[e]] -= self.l_val[e] * bp;
                }
            }
        }
        let work = &mut self.work;
        for w in work.iter_mut() {
            *w = T::zero();
        }
        for k in (0..steps).rev() {
            let xq = rhs[self.piv_row[k]] / self.diag[k];
            work[self.piv_col[k]] = xq;
            if xq != T::zero() {
                for e in self.uc_start[k]..self.uc_start[k + 1] {
                    rhs[self.uc_idx[e]] -= self.uc_val[e] * xq;
                }
            }
        }
        rhs.copy_from_slice(work);
        for t in 0..self.eta_pos.len() {
            let r = self.eta_pos[t];
            let xr = rhs[r] / self.eta_piv[t];
            rhs[r] = xr;
            if xr != T::zero() {
                for e in self.eta_start[t]..self.eta_start[t + 1] {
                    rhs[self.eta_idx[e]] -= self.eta_val[e] * xr;
                }
            }
        }
    }

    /// Solves `B^T y = c` in place: `rhs` is indexed by basis position on input
    /// and by row on output.
    pub(crate) fn btran(&mut self, rhs: &mut [T]) {
        for t in (0..self.eta_pos.len()).rev() {
            let r = self.eta_pos[t];
            let mut s = rhs[r];
            for e in self.eta_start[t]..self.eta_start[t + 1] {
                s -= self.eta_val[e] * rhs[self.eta_idx[e]];
            }
            rhs[r] = s / self.eta_piv[t];
        }
        let steps = self.piv_row.len();
        let work = &mut self.work;
        for k in 0..steps {
            let z = rhs[self.piv_col[k]] / self.diag[k];
            work[self.piv_row[k]] = z;
            if z != T::zero() {
                for e in self.ur_start[k]..self.ur_start[k + 1] {
                    rhs[self.ur_idx[e]] -= self.ur_val[e] * z;
                }
            }
        }
        for k in (0..steps).rev() {
            let p = self.piv_row[k];
            let mut s = work[p];
            for e in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[e] * work[self.l_idx[e]];
            }
            work[p] = s;
        }
        rhs.copy_from_slice(work);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// transformed representation `B^{-1} a` is `alpha`.
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[T]) {
        let drop = T::drop_tol();
        self.eta_pos.push(pos);
        self.eta_piv.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > drop {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}
