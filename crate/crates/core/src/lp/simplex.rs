use super::lu::{BasisFactor, Singular};
use super::{CscMatrix, LpError, LpOptions, LpProblem, LpSolution, LpStatus};
use crate::scalar::Scalar;

/// Maximum number of eta updates between refactorizations.
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Working state of one solve. Variables `0..n` are structural, `n..n+m` are
/// row logicals with column `sign[i] * e_i`.
pub(crate) struct Simplex<'a, T> {
    prob: &'a LpProblem<T>,
    rows: CscMatrix<T>,
    m: usize,
    n: usize,
    cost: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    sign: Vec<T>,
    x: Vec<T>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    factor: BasisFactor<T>,
    d: Vec<T>,
    y: Vec<T>,
    feas_tol: T,
    opt_tol: T,
    piv_tol: T,
    iters: usize,
    max_iters: usize,
    initial_basis: Option<Vec<usize>>,
    col_buf: Vec<T>,
    row_buf: Vec<T>,
    alpha_row: Vec<T>,
    touched: Vec<usize>,
    in_touched: Vec<bool>,
    flips: Vec<usize>,
    flip_buf: Vec<T>,
    cand: Vec<(T, T, usize)>,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    pub(crate) fn new(prob: &'a LpProblem<T>, options: &LpOptions<T>) -> Self {
        let m = prob.num_rows();
        let n = prob.num_vars();
        let mut cost = prob.cost.clone();
        cost.extend(std::iter::repeat(T::zero()).take(m));
        let mut lower = prob.lower.clone();
        lower.extend(std::iter::repeat(T::zero()).take(m));
        let mut upper = prob.upper.clone();
        upper.extend(std::iter::repeat(T::zero()).take(m));
        Simplex {
            prob,
            rows: prob.eq_matrix.transpose(),
            m,
            n,
            cost,
            lower,
            upper,
            sign: vec![T::one(); m],
            x: vec![T::zero(); n + m],
            basis: Vec::new(),
            state: vec![VarState::Lower; n + m],
            factor: BasisFactor::default(),
            d: vec![T::zero(); n + m],
            y: vec![T::zero(); m],
            feas_tol: options.feas_tol,
            opt_tol: options.feas_tol,
            piv_tol: T::pivot_tol(),
            iters: 0,
            max_iters: options.max_iters,
            initial_basis: options.initial_basis.clone(),
            col_buf: vec![T::zero(); m],
            row_buf: vec![T::zero(); m],
            alpha_row: vec![T::zero(); n + m],
            touched: Vec::new(),
            in_touched: vec![false; n + m],
            flips: Vec::new(),
            flip_buf: vec![T::zero(); m],
            cand: Vec::new(),
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn column_vec(&self, j: usize) -> Vec<(usize, T)> {
        if j < self.n {
            let (ri, rv) = self.prob.eq_matrix.col(j);
            ri.iter().copied().zip(rv.iter().copied()).collect()
        } else {
            vec![(j - self.n, self.sign[j - self.n])]
        }
    }

    fn scatter_column(&self, j: usize, out: &mut [T]) {
        for v in out.iter_mut() {
            *v = T::zero();
        }
        if j < self.n {
            let (ri, rv) = self.prob.eq_matrix.col(j);
            for (&r, &v) in ri.iter().zip(rv) {
                out[r] = v;
            }
        } else {
            out[j - self.n] = self.sign[j - self.n];
        }
    }

    fn dot_column(&self, j: usize, y: &[T]) -> T {
        if j < self.n {
            let (ri, rv) = self.prob.eq_matrix.col(j);
            ri.iter().zip(rv).map(|(&r, &v)| v * y[r]).sum()
        } else {
            self.sign[j - self.n] * y[j - self.n]
        }
    }

    /// Nonbasic placement at the finite bound nearest to the current value.
    fn park_nonbasic(&mut self, j: usize) {
        let (l, u, v) = (self.lower[j], self.upper[j], self.x[j]);
        let st = match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if (v - l).abs() <= (u - v).abs() {
                    VarState::Lower
                } else {
                    VarState::Upper
                }
            }
            (true, false) => VarState::Lower,
            (false, true) => VarState::Upper,
            (false, false) => VarState::Zero,
        };
        self.set_nonbasic(j, st);
    }

    fn set_nonbasic(&mut self, j: usize, st: VarState) {
        self.state[j] = st;
        self.x[j] = match st {
            VarState::Lower => self.lower[j],
            VarState::Upper => self.upper[j],
            VarState::Zero => T::zero(),
            VarState::Basic(_) => unreachable!("set_nonbasic called with Basic"),
        };
    }

    fn install_basis(&mut self, basis: Vec<usize>) {
        for j in 0..self.n + self.m {
            if let VarState::Basic(_) = self.state[j] {
                self.state[j] = VarState::Lower;
            }
        }
        for (pos, &j) in basis.iter().enumerate() {
            self.state[j] = VarState::Basic(pos);
        }
        self.basis = basis;
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        for _attempt in 0..=self.m {
            let cols: Vec<Vec<(usize, T)>> = self.basis.iter().map(|&j| self.column_vec(j)).collect();
            match BasisFactor::factorize(self.m, cols) {
                Ok(f) => {
                    self.factor = f;
                    return Ok(());
                }
                Err(Singular { cols, rows }) => {
                    if cols.len() != rows.len() || cols.is_empty() {
                        return Err(LpError::NumericalFailure(f64::INFINITY));
                    }
                    for (&pos, &row) in cols.iter().zip(&rows) {
                        let old = self.basis[pos];
                        let logical = self.n + row;
                        self.park_nonbasic(old);
                        self.basis[pos] = logical;
                        self.state[logical] = VarState::Basic(pos);
                    }
                }
            }
        }
        Err(LpError::NumericalFailure(f64::INFINITY))
    }

    fn compute_primal(&mut self) {
        let mut rhs = self.prob.eq_rhs.clone();
        for j in 0..self.n + self.m {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj == T::zero() {
                continue;
            }
            if j < self.n {
                let (ri, rv) = self.prob.eq_matrix.col(j);
                for (&r, &v) in ri.iter().zip(rv) {
                    rhs[r] -= v * xj;
                }
            } else {
                rhs[j - self.n] -= self.sign[j - self.n] * xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
    }

    fn compute_duals(&mut self) {
        let mut cb: Vec<T> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.factor.btran(&mut cb);
        self.y = cb;
        let y = std::mem::take(&mut self.y);
        for j in 0..self.n + self.m {
            self.d[j] = match self.state[j] {
                VarState::Basic(_) => T::zero(),
                _ => self.cost[j] - self.dot_column(j, &y),
            };
        }
        self.y = y;
    }

    fn place_dual_feasible(&mut self) {
        for j in 0..self.n + self.m {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let st = match (self.lower[j].is_finite(), self.upper[j].is_finite()) {
                (true, true) => {
                    if self.d[j] < T::zero() {
                        VarState::Upper
                    } else {
                        VarState::Lower
                    }
                }
                (true, false) => VarState::Lower,
                (false, true) => VarState::Upper,
                (false, false) => VarState::Zero,
            };
            self.set_nonbasic(j, st);
        }
    }

    fn is_dual_feasible(&self) -> bool {
        (0..self.n + self.m).all(|j| {
            if self.is_fixed(j) {
                return true;
            }
            match self.state[j] {
                VarState::Basic(_) => true,
                VarState::Lower => self.d[j] >= -self.opt_tol,
                VarState::Upper => self.d[j] <= self.opt_tol,
                VarState::Zero => self.d[j].abs() <= self.opt_tol,
            }
        })
    }

    fn primal_infeasibility(&self, j: usize) -> T {
        let v = self.x[j];
        if v < self.lower[j] {
            self.lower[j] - v
        } else if v > self.upper[j] {
            v - self.upper[j]
        } else {
            T::zero()
        }
    }

    fn is_primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| self.primal_infeasibility(j) <= self.feas_tol)
    }

    fn maybe_refactor(&mut self) -> Result<bool, LpError> {
        let etas = self.factor.num_etas();
        if etas >= REFACTOR_EVERY || (etas > 8 && self.factor.eta_nnz() > 4 * self.factor.lu_nnz() + 8 * self.m) {
            self.refactor()?;
            self.compute_primal();
            return Ok(true);
        }
        Ok(false)
    }

    fn start_basis(&mut self) -> Vec<usize> {
        let logical: Vec<usize> = (0..self.m).map(|i| self.n + i).collect();
        let Some(hint) = self.initial_basis.take() else { return logical };
        if hint.len() != self.m {
            return logical;
        }
        let mut seen = vec![false; self.n + self.m];
        for &j in &hint {
            if j >= self.n + self.m || seen[j] {
                return logical;
            }
            seen[j] = true;
        }
        hint
    }

    pub(crate) fn run(mut self) -> Result<LpSolution<T>, LpError> {
        let start = self.start_basis();
        for j in 0..self.n + self.m {
            self.park_nonbasic(j);
        }
        self.install_basis(start);
        self.refactor()?;
        self.compute_duals();
        self.place_dual_feasible();
        self.compute_primal();

        let status = if self.is_dual_feasible() {
            match self.dual()? {
                Some(LpStatus::Optimal) => {
                    self.refactor()?;
                    self.compute_primal();
                    self.compute_duals();
                    if self.is_dual_feasible() {
                        LpStatus::Optimal
                    } else if self.is_primal_feasible() {
                        self.primal()?
                    } else {
                        self.two_phase()?
                    }
                }
                Some(other) => other,
                None if self.is_primal_feasible() => self.primal()?,
                None => self.two_phase()?,
            }
        } else if self.is_primal_feasible() {
            self.primal()?
        } else {
            self.two_phase()?
        };
        self.finish(status)
    }

    fn two_phase(&mut self) -> Result<LpStatus, LpError> {
        let n = self.n;
        let m = self.m;
        for j in 0..n {
            self.state[j] = VarState::Lower;
            self.park_nonbasic(j);
        }
        let mut resid = self.prob.eq_rhs.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != T::zero() {
                let (ri, rv) = self.prob.eq_matrix.col(j);
                for (&r, &v) in ri.iter().zip(rv) {
                    resid[r] -= v * xj;
                }
            }
        }
        for i in 0..m {
            self.sign[i] = if resid[i] < T::zero() { -T::one() } else { T::one() };
            self.upper[n + i] = T::infinity();
        }
        let phase2_cost = std::mem::take(&mut self.cost);
        self.cost = vec![T::zero(); n + m];
        for i in 0..m {
            self.cost[n + i] = T::one();
        }
        self.install_basis((0..m).map(|i| n + i).collect());
        self.refactor()?;
        self.compute_primal();
        let st = self.primal()?;
        debug_assert_eq!(st, LpStatus::Optimal);

        let bnorm = self.prob.eq_rhs.iter().fold(T::zero(), |a, b| a.max(b.abs()));
        let worst = (0..m).map(|i| self.x[n + i].abs()).fold(T::zero(), T::max);
        self.cost = phase2_cost;
        for i in 0..m {
            self.upper[n + i] = T::zero();
            if !matches!(self.state[n + i], VarState::Basic(_)) {
                self.set_nonbasic(n + i, VarState::Lower);
            }
        }
        if worst > self.feas_tol * (T::one() + bnorm) {
            return Ok(LpStatus::Infeasible);
        }
        self.primal()
    }

    /// Bounded primal simplex on the current cost vector. Assumes primal feasibility.
    fn primal(&mut self) -> Result<LpStatus, LpError> {
        let bland_after = 3 * (self.m + self.n);
        let mut local = 0usize;
        self.compute_duals();
        loop {
            let bland = local >= bland_after;
            let mut entering: Option<(usize, T, T)> = None;
            for j in 0..self.n + self.m {
                if self.is_fixed(j) {
                    continue;
                }
                let dj = self.d[j];
                let (score, dir) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::Lower if dj < -self.opt_tol => (-dj, T::one()),
                    VarState::Upper if dj > self.opt_tol => (dj, -T::one()),
                    VarState::Zero if dj.abs() > self.opt_tol => (dj.abs(), if dj < T::zero() { T::one() } else { -T::one() }),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, score, dir));
                    break;
                }
                if entering.map_or(true, |(_, s, _)| score > s) {
                    entering = Some((j, score, dir));
                }
            }
            let Some((q, _, dir)) = entering else { return Ok(LpStatus::Optimal) };
            if self.iters >= self.max_iters {
                return Err(LpError::IterationLimit(self.max_iters));
            }

            let mut alpha = std::mem::take(&mut self.col_buf);
            self.scatter_column(q, &mut alpha);
            self.factor.ftran(&mut alpha);

            // Harris two-pass ratio test
            let mut t1 = T::infinity();
            for (pos, &j) in self.basis.iter().enumerate() {
                let a = dir * alpha[pos];
                if a > self.piv_tol && self.lower[j].is_finite() {
                    t1 = t1.min((self.x[j] - self.lower[j] + self.feas_tol) / a);
                } else if a < -self.piv_tol && self.upper[j].is_finite() {
                    t1 = t1.min((self.upper[j] - self.x[j] + self.feas_tol) / -a);
                }
            }
            let range = self.upper[q] - self.lower[q];
            if !t1.is_finite() && !range.is_finite() {
                self.col_buf = alpha;
                return Ok(LpStatus::Unbounded);
            }

            let mut leave: Option<(usize, T, T, bool)> = None; // (pos, ratio, |a|, to_lower)
            if bland {
                let mut tmin = T::infinity();
                for (pos, &j) in self.basis.iter().enumerate() {
                    let a = dir * alpha[pos];
                    let r = if a > self.piv_tol && self.lower[j].is_finite() {
                        (self.x[j] - self.lower[j]) / a
                    } else if a < -self.piv_tol && self.upper[j].is_finite() {
                        (self.upper[j] - self.x[j]) / -a
                    } else {
                        continue;
                    };
                    tmin = tmin.min(r.max(T::zero()));
                }
                let slack = self.feas_tol;
                for (pos, &j) in self.basis.iter().enumerate() {
                    let a = dir * alpha[pos];
                    let (r, to_lower) = if a > self.piv_tol && self.lower[j].is_finite() {
                        ((self.x[j] - self.lower[j]) / a, true)
                    } else if a < -self.piv_tol && self.upper[j].is_finite() {
                        ((self.upper[j] - self.x[j]) / -a, false)
                    } else {
                        continue;
                    };
                    if r.max(T::zero()) <= tmin + slack / a.abs()
                        && leave.map_or(true, |(p, _, _, _)| j < self.basis[p])
                    {
                        leave = Some((pos, r.max(T::zero()), a.abs(), to_lower));
                    }
                }
                t1 = tmin;
            } else {
                for (pos, &j) in self.basis.iter().enumerate() {
                    let a = dir * alpha[pos];
                    let (r, to_lower) = if a > self.piv_tol && self.lower[j].is_finite() {
                        ((self.x[j] - self.lower[j]) / a, true)
                    } else if a < -self.piv_tol && self.upper[j].is_finite() {
                        ((self.upper[j] - self.x[j]) / -a, false)
                    } else {
                        continue;
                    };
                    if r <= t1 && leave.map_or(true, |(_, _, best, _)| a.abs() > best) {
                        leave = Some((pos, r.max(T::zero()), a.abs(), to_lower));
                    }
                }
            }

            self.iters += 1;
            local += 1;
            if range.is_finite() && range <= t1 {
                // bound flip
                for (pos, &j) in self.basis.iter().enumerate() {
                    self.x[j] -= dir * range * alpha[pos];
                }
                let st = if dir > T::zero() { VarState::Upper } else { VarState::Lower };
                self.set_nonbasic(q, st);
                self.col_buf = alpha;
                continue;
            }
            let (p, t, _, to_lower) = leave.expect("finite ratio implies a leaving row");
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= dir * t * alpha[pos];
            }
            self.x[q] += dir * t;
            let leaving = self.basis[p];
            self.set_nonbasic(leaving, if to_lower { VarState::Lower } else { VarState::Upper });
            self.basis[p] = q;
            self.state[q] = VarState::Basic(p);
            self.factor.push_eta(p, &alpha);
            self.col_buf = alpha;
            self.maybe_refactor()?;
            self.compute_duals();
        }
    }

    /// Bounded dual simplex on the current cost vector. Assumes dual
    /// feasibility; returns `None` if rounding destroyed it.
    fn dual(&mut self) -> Result<Option<LpStatus>, LpError> {
        let bland_after = 3 * (self.m + self.n);
        let mut local = 0usize;
        loop {
            let bland = local >= bland_after;
            let mut leave: Option<(usize, T)> = None;
            for (pos, &j) in self.basis.iter().enumerate() {
                let inf = self.primal_infeasibility(j);
                if inf <= self.feas_tol {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((p, best)) => {
                        if bland {
                            j < self.basis[p]
                        } else {
                            inf > best
                        }
                    }
                };
                if better {
                    leave = Some((pos, inf));
                }
            }
            let Some((p, _)) = leave else { return Ok(Some(LpStatus::Optimal)) };
            if self.iters >= self.max_iters {
                return Err(LpError::IterationLimit(self.max_iters));
            }
            let jl = self.basis[p];
            let to_upper = self.x[jl] > self.upper[jl];
            let bound = if to_upper { self.upper[jl] } else { self.lower[jl] };
            let delta = self.x[jl] - bound;

            // pivot row
            let mut rho = std::mem::take(&mut self.row_buf);
            for v in rho.iter_mut() {
                *v = T::zero();
            }
            rho[p] = T::one();
            self.factor.btran(&mut rho);
            self.compute_alpha_row(&rho);
            self.row_buf = rho;

            let s = if to_upper { T::one() } else { -T::one() };
            let mut flips = std::mem::take(&mut self.flips);
            flips.clear();
            let enter = if bland { self.bland_ratio(s) } else { self.long_step_ratio(s, delta.abs(), &mut flips) };
            let Some(q) = enter else {
                self.flips = flips;
                self.clear_alpha_row();
                if self.factor.num_etas() > 0 {
                    self.refactor()?;
                    self.compute_primal();
                    self.compute_duals();
                    if self.is_dual_feasible() {
                        continue;
                    }
                    return Ok(None);
                }
                if !self.is_dual_feasible() {
                    return Ok(None);
                }
                return Ok(Some(LpStatus::Infeasible));
            };

            let mut alpha = std::mem::take(&mut self.col_buf);
            self.scatter_column(q, &mut alpha);
            self.factor.ftran(&mut alpha);
            let apq = alpha[p];
            let arq = self.alpha_row[q];
            if apq.abs() <= self.piv_tol
                || (apq - arq).abs() > T::lit(1e-6) * (T::one() + apq.abs())
            {
                // row and column disagree: rebuild the factorization and retry
                self.col_buf = alpha;
                self.flips = flips;
                self.clear_alpha_row();
                if self.factor.num_etas() == 0 {
                    return Err(LpError::NumericalFailure((apq - arq).abs().as_f64()));
                }
                self.refactor()?;
                self.compute_primal();
                self.compute_duals();
                continue;
            }

            self.iters += 1;
            local += 1;
            if !flips.is_empty() {
                self.apply_flips(&flips);
            }
            self.flips = flips;
            let delta = self.x[jl] - bound;
            let theta = self.d[q] / apq;
            for &j in &self.touched {
                if !matches!(self.state[j], VarState::Basic(_)) {
                    self.d[j] -= theta * self.alpha_row[j];
                }
            }
            self.d[jl] = -theta;
            self.d[q] = T::zero();
            self.clear_alpha_row();

            let t = delta / apq;
            for (pos, &j) in self.basis.iter().enumerate() {
                self.x[j] -= t * alpha[pos];
            }
            self.x[q] += t;
            self.set_nonbasic(jl, if to_upper { VarState::Upper } else { VarState::Lower });
            self.basis[p] = q;
            self.state[q] = VarState::Basic(p);
            self.factor.push_eta(p, &alpha);
            self.col_buf = alpha;
            if self.maybe_refactor()? {
                self.compute_duals();
            }
        }
    }

    /// Textbook ratio test with smallest-index tie breaking.
    fn bland_ratio(&self, s: T) -> Option<usize> {
        let mut tmin = T::infinity();
        for &j in &self.touched {
            if !self.is_fixed(j) {
                if let Some(r) = self.dual_ratio(j, s) {
                    tmin = tmin.min(r);
                }
            }
        }
        let mut enter: Option<usize> = None;
        for &j in &self.touched {
            if self.is_fixed(j) {
                continue;
            }
            let Some(r) = self.dual_ratio(j, s) else { continue };
            let a = self.alpha_row[j].abs();
            if r <= tmin + self.opt_tol / a && enter.map_or(true, |e| j < e) {
                enter = Some(j);
            }
        }
        enter
    }

    /// Bound-flipping ratio test. Boxed candidates are passed (and collected in
    /// `flips`) while the leaving row stays infeasible; the entering variable is
    /// then picked Harris-style among the remaining breakpoints.
    fn long_step_ratio(&mut self, s: T, infeas: T, flips: &mut Vec<usize>) -> Option<usize> {
        let mut cand = std::mem::take(&mut self.cand);
        cand.clear();
        for &j in &self.touched {
            if !self.is_fixed(j) {
                if let Some(r) = self.dual_ratio(j, s) {
                    cand.push((r, self.alpha_row[j].abs(), j));
                }
            }
        }
        cand.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.2.cmp(&b.2)));
        let mut slope = infeas;
        let mut idx = 0;
        while idx < cand.len() {
            let (_, a, j) = cand[idx];
            let range = self.upper[j] - self.lower[j];
            if !range.is_finite() {
                break;
            }
            let next = slope - a * range;
            if next <= self.feas_tol {
                break;
            }
            slope = next;
            idx += 1;
        }
        let result = if idx == cand.len() {
            None
        } else {
            let bound = cand[idx..].iter().map(|&(r, a, _)| r + self.opt_tol / a).fold(T::infinity(), T::min);
            let mut best: Option<(T, usize)> = None;
            for &(r, a, j) in &cand[idx..] {
                if r <= bound && best.map_or(true, |(ba, _)| a > ba) {
                    best = Some((a, j));
                }
            }
            flips.extend(cand[..idx].iter().map(|&(_, _, j)| j));
            best.map(|(_, j)| j)
        };
        self.cand = cand;
        result
    }

    /// Moves the listed nonbasic variables to their opposite bounds and updates
    /// the basic values.
    fn apply_flips(&mut self, flips: &[usize]) {
        let mut col = std::mem::take(&mut self.flip_buf);
        for v in col.iter_mut() {
            *v = T::zero();
        }
        for &j in flips {
            let (st, dx) = match self.state[j] {
                VarState::Lower => (VarState::Upper, self.upper[j] - self.lower[j]),
                VarState::Upper => (VarState::Lower, self.lower[j] - self.upper[j]),
                _ => continue,
            };
            if j < self.n {
                let (ri, rv) = self.prob.eq_matrix.col(j);
                for (&r, &v) in ri.iter().zip(rv) {
                    col[r] += v * dx;
                }
            } else {
                col[j - self.n] += self.sign[j - self.n] * dx;
            }
            self.set_nonbasic(j, st);
        }
        self.factor.ftran(&mut col);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] -= col[pos];
        }
        self.flip_buf = col;
    }

    /// Ratio `|d_j / alpha_j|` for an eligible entering candidate of the dual
    /// ratio test; `s` is +1 when the leaving variable moves to its upper bound.
    fn dual_ratio(&self, j: usize, s: T) -> Option<T> {
        let a = s * self.alpha_row[j];
        let dj = self.d[j];
        match self.state[j] {
            VarState::Lower if a > self.piv_tol => Some((dj / a).max(T::zero())),
            VarState::Upper if a < -self.piv_tol => Some((dj / a).max(T::zero())),
            VarState::Zero if a.abs() > self.piv_tol => Some((dj / a).abs()),
            _ => None,
        }
    }

    fn compute_alpha_row(&mut self, rho: &[T]) {
        let drop = T::drop_tol();
        for (i, &ri) in rho.iter().enumerate() {
            if ri.abs() <= drop {
                continue;
            }
            let (cols, vals) = self.rows.col(i);
            for (&j, &a) in cols.iter().zip(vals) {
                if !self.in_touched[j] {
                    self.in_touched[j] = true;
                    self.touched.push(j);
                }
                self.alpha_row[j] += ri * a;
            }
            let lj = self.n + i;
            if !self.in_touched[lj] {
                self.in_touched[lj] = true;
                self.touched.push(lj);
            }
            self.alpha_row[lj] += ri * self.sign[i];
        }
        for &j in &self.touched {
            if matches!(self.state[j], VarState::Basic(_)) {
                self.alpha_row[j] = T::zero();
                self.in_touched[j] = false;
            }
        }
        let state = &self.state;
        self.touched.retain(|&j| !matches!(state[j], VarState::Basic(_)));
    }

    fn clear_alpha_row(&mut self) {
        for &j in &self.touched {
            self.alpha_row[j] = T::zero();
            self.in_touched[j] = false;
        }
        self.touched.clear();
    }

    fn finish(mut self, status: LpStatus) -> Result<LpSolution<T>, LpError> {
        self.refactor()?;
        self.compute_primal();
        self.compute_duals();
        let primal: Vec<T> = self.x[..self.n].to_vec();
        if status == LpStatus::Optimal {
            let ax = self.prob.eq_matrix.mul_vec(&primal);
            let bnorm = self.prob.eq_rhs.iter().fold(T::zero(), |a, b| a.max(b.abs()));
            let resid = ax.iter().zip(&self.prob.eq_rhs).fold(T::zero(), |a, (&l, &r)| a.max((l - r).abs()));
            if resid > T::lit(1e-7) * (T::one() + bnorm) && resid > T::epsilon().sqrt() * (T::one() + bnorm) {
                return Err(LpError::NumericalFailure(resid.as_f64()));
            }
        }
        let objective = self.prob.objective_at(&primal);
        Ok(LpSolution {
            status,
            primal,
            dual: self.y.clone(),
            reduced_costs: self.d[..self.n].to_vec(),
            objective,
            iterations: self.iters,
            basis: self.basis.clone(),
        })
    }
}
