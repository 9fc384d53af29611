//! Optimal control of a fluid network by time discretization.
//!
//! The horizon `[0, T]` is cut into intervals with piecewise-constant controls
//! `u_k`, which makes the state piecewise linear and the holding cost an exact
//! trapezoid sum. The resulting LP has, in this variable order,
//!
//! * controls `u_k` for `k < N`, boxed in `[0, 1]`,
//! * states `x_k` for `k <= N`, non-negative,
//! * server slacks `s_k` for `k < N`, non-negative,
//!
//! and rows `x_0 = x0`, `x_{k+1} - x_k - h_k A u_k = h_k lambda`,
//! `D u_k + s_k = 1`. Multipliers of the flow rows approximate the costate at
//! interval midpoints: they are non-negative and fall at rate `c` while a class
//! holds fluid.

use std::io::Write;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::lp::{solve_lp_with, CscMatrix, LpError, LpOptions, LpProblem, LpSolution, LpStatus};
use crate::network::{build_matrices, workload, NetworkError, NetworkSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("network is unstable: workload {0:?}")]
    UnstableNetwork(Vec<f64>),
    #[error("invalid discretization: {0}")]
    InvalidConfig(String),
    #[error("initial state must be finite, non-negative and of length {0}")]
    InvalidState(usize),
    #[error("system not emptied by the horizon: |x(T)| = {residual:.3e} > {bound:.3e}")]
    EmptyingFailed { residual: f64, bound: f64 },
    #[error("discretized problem is {0:?}")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Horizon {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationConfig {
    pub horizon: Horizon,
    pub intervals: usize,
    /// Grid times are `T (k/N)^grading`; 1 is uniform, larger values refine near zero.
    pub grading: f64,
    /// Relative emptiness threshold for depletion times and the terminal check.
    pub empty_tol: f64,
    /// Re-solve once with intervals around control changes split in four.
    pub refine: bool,
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            horizon: Horizon::Auto,
            intervals: 400,
            grading: 2.0,
            empty_tol: 1e-6,
            refine: false,
            feas_tol: 1e-9,
            max_iters: 1_000_000,
        }
    }
}

impl DiscretizationConfig {
    pub fn with_intervals(intervals: usize) -> Self {
        DiscretizationConfig { intervals, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), FluidError> {
        if self.intervals < 2 {
            return Err(FluidError::InvalidConfig("at least two intervals are required".into()));
        }
        if let Horizon::Fixed(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(FluidError::InvalidConfig(format!("horizon must be positive, got {t}")));
            }
        }
        if !(self.grading >= 1.0 && self.grading.is_finite()) {
            return Err(FluidError::InvalidConfig(format!("grading must be at least 1, got {}", self.grading)));
        }
        if !(self.empty_tol > 0.0) || !(self.feas_tol > 0.0) {
            return Err(FluidError::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

fn serialize_depletion<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for d in v {
        match d {
            Some(t) => seq.serialize_element(t)?,
            None => seq.serialize_element("never")?,
        }
    }
    seq.end()
}

#[derive(Debug, Clone, Serialize)]
pub struct FluidSolution {
    pub grid: Vec<f64>,
    /// Control on `[grid[k], grid[k+1])`.
    pub u_pieces: Vec<Vec<f64>>,
    pub x_nodes: Vec<Vec<f64>>,
    pub objective: f64,
    /// Costate estimate at each grid time.
    pub costate_nodes: Vec<Vec<f64>>,
    /// Flow-row multipliers, one per interval (costate near the interval midpoint).
    pub costate_intervals: Vec<Vec<f64>>,
    /// First grid time at which each class is empty.
    #[serde(serialize_with = "serialize_depletion")]
    pub depletion: Vec<Option<f64>>,
    pub lp_iterations: usize,
}

impl FluidSolution {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("grid has at least two points")
    }

    pub fn intervals(&self) -> usize {
        self.u_pieces.len()
    }

    /// Index of the interval containing `t` (the last one for `t >= T`).
    pub fn interval_at(&self, t: f64) -> usize {
        let k = self.grid.partition_point(|&g| g <= t);
        k.saturating_sub(1).min(self.intervals() - 1)
    }

    pub fn control_at(&self, t: f64) -> &[f64] {
        &self.u_pieces[self.interval_at(t)]
    }

    /// Linear interpolation of the state.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let k = self.interval_at(t);
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.x_nodes[k].iter().zip(&self.x_nodes[k + 1]).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// Writes `t, x_1..x_n, u_1..u_n`; the final row has empty control fields.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.x_nodes[0].len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for (k, t) in self.grid.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(self.x_nodes[k].iter().map(|v| v.to_string()));
            match self.u_pieces.get(k) {
                Some(u) => rec.extend(u.iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat(String::new()).take(n)),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// `T = 2 max_j [D (-A)^{-1} x0]_j / (1 - rho_j)`: twice a bound on the time
/// each server needs to clear the work already in the system.
pub fn default_horizon(spec: &NetworkSpec<f64>, x0: &[f64]) -> Result<f64, FluidError> {
    let w = workload(spec)?;
    if !w.stable {
        return Err(FluidError::UnstableNetwork(w.rho));
    }
    let (a, d) = build_matrices(spec)?;
    let neg_x0: Vec<f64> = x0.iter().map(|v| -v).collect();
    let work = d.mul_vec(&a.solve(&neg_x0));
    Ok(work.iter().zip(&w.rho).map(|(&wj, &rj)| 2.0 * wj / (1.0 - rj)).fold(0.0, f64::max))
}

/// Grid on `[0, horizon]` with `t_k = horizon (k/N)^grading`.
pub fn time_grid(horizon: f64, intervals: usize, grading: f64) -> Vec<f64> {
    let n = intervals as f64;
    (0..=intervals)
        .map(|k| if grading == 1.0 { horizon * k as f64 / n } else { horizon * (k as f64 / n).powf(grading) })
        .collect()
}

/// Discretized problem together with the metadata needed to read its solution.
#[derive(Debug, Clone)]
pub struct FluidLp {
    pub problem: LpProblem<f64>,
    pub grid: Vec<f64>,
    /// Triangular starting basis (states and slacks), dual feasible by construction.
    pub warm_basis: Vec<usize>,
    n: usize,
    m: usize,
}

impl FluidLp {
    fn intervals(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn u_var(&self, k: usize, i: usize) -> usize {
        k * self.n + i
    }

    pub fn x_var(&self, k: usize, i: usize) -> usize {
        self.intervals() * self.n + k * self.n + i
    }

    pub fn s_var(&self, k: usize, j: usize) -> usize {
        self.intervals() * self.n + (self.intervals() + 1) * self.n + k * self.m + j
    }

    pub fn init_row(&self, i: usize) -> usize {
        i
    }

    pub fn flow_row(&self, k: usize, i: usize) -> usize {
        self.n + k * self.n + i
    }

    pub fn server_row(&self, k: usize, j: usize) -> usize {
        self.n + self.intervals() * self.n + k * self.m + j
    }
}

fn check_state(spec: &NetworkSpec<f64>, x0: &[f64]) -> Result<(), FluidError> {
    if x0.len() != spec.n() || x0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(FluidError::InvalidState(spec.n()));
    }
    Ok(())
}

/// Horizon used by `solve_fluid`: the configured value, or the default with a
/// unit fallback for the empty system.
pub fn resolve_horizon(spec: &NetworkSpec<f64>, x0: &[f64], config: &DiscretizationConfig) -> Result<f64, FluidError> {
    match config.horizon {
        Horizon::Fixed(t) => Ok(t),
        Horizon::Auto => {
            let t = default_horizon(spec, x0)?;
            Ok(if t > 0.0 { t } else { 1.0 })
        }
    }
}

pub fn discretize(spec: &NetworkSpec<f64>, x0: &[f64], config: &DiscretizationConfig) -> Result<FluidLp, FluidError> {
    config.validate()?;
    check_state(spec, x0)?;
    let t = resolve_horizon(spec, x0, config)?;
    discretize_on_grid(spec, x0, time_grid(t, config.intervals, config.grading))
}

pub fn discretize_on_grid(spec: &NetworkSpec<f64>, x0: &[f64], grid: Vec<f64>) -> Result<FluidLp, FluidError> {
    check_state(spec, x0)?;
    if grid.len() < 3 || grid[0] != 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(FluidError::InvalidConfig("grid must start at 0 and increase strictly".into()));
    }
    let (a, d) = build_matrices(spec)?;
    let (n, m) = (spec.n(), spec.m());
    let big_n = grid.len() - 1;
    let h: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let mut lp = FluidLp {
        problem: LpProblem::nonnegative(Vec::new(), CscMatrix::zeros(0, 0), Vec::new()),
        grid,
        warm_basis: Vec::new(),
        n,
        m,
    };
    let nvars = big_n * (2 * n + m) + n;
    let nrows = n + big_n * (n + m);

    let mut cost = vec![0.0; nvars];
    let mut upper = vec![f64::INFINITY; nvars];
    for k in 0..big_n {
        for i in 0..n {
            upper[lp.u_var(k, i)] = 1.0;
        }
    }
    for k in 0..=big_n {
        let w = match k {
            0 => h[0] / 2.0,
            _ if k == big_n => h[big_n - 1] / 2.0,
            _ => (h[k - 1] + h[k]) / 2.0,
        };
        for i in 0..n {
            cost[lp.x_var(k, i)] = spec.c()[i] * w;
        }
    }

    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(nvars * 3);
    let mut rhs = vec![0.0; nrows];
    for i in 0..n {
        trip.push((lp.init_row(i), lp.x_var(0, i), 1.0));
        rhs[lp.init_row(i)] = x0[i];
    }
    for k in 0..big_n {
        for i in 0..n {
            let row = lp.flow_row(k, i);
            trip.push((row, lp.x_var(k + 1, i), 1.0));
            trip.push((row, lp.x_var(k, i), -1.0));
            for j in 0..n {
                let aij = a.get(i, j);
                if aij != 0.0 {
                    trip.push((row, lp.u_var(k, j), -h[k] * aij));
                }
            }
            rhs[row] = h[k] * spec.lambda()[i];
        }
        for j in 0..m {
            let row = lp.server_row(k, j);
            for i in 0..n {
                if d.get(j, i) == 1 {
                    trip.push((row, lp.u_var(k, i), 1.0));
                }
            }
            trip.push((row, lp.s_var(k, j), 1.0));
            rhs[row] = 1.0;
        }
    }
    let mut basis = vec![0; nrows];
    for i in 0..n {
        basis[lp.init_row(i)] = lp.x_var(0, i);
        for k in 0..big_n {
            basis[lp.flow_row(k, i)] = lp.x_var(k + 1, i);
        }
    }
    for k in 0..big_n {
        for j in 0..m {
            basis[lp.server_row(k, j)] = lp.s_var(k, j);
        }
    }
    lp.problem = LpProblem {
        cost,
        eq_matrix: CscMatrix::from_triplets(nrows, nvars, &trip),
        eq_rhs: rhs,
        lower: vec![0.0; nvars],
        upper,
    };
    lp.warm_basis = basis;
    Ok(lp)
}

fn solve_discretized(
    spec: &NetworkSpec<f64>,
    x0: &[f64],
    lp: &FluidLp,
    config: &DiscretizationConfig,
    basis: Option<&[usize]>,
) -> Result<(FluidSolution, Vec<usize>), FluidError> {
    let start = basis.unwrap_or(&lp.warm_basis).to_vec();
    let opts = LpOptions { feas_tol: config.feas_tol, max_iters: config.max_iters, initial_basis: Some(start) };
    let sol = solve_lp_with(&lp.problem, &opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(FluidError::NotOptimal(sol.status));
    }
    let (n, big_n) = (spec.n(), lp.intervals());
    let primal = canonical_primal(lp, &sol, config).unwrap_or_else(|| sol.primal.clone());
    let u_pieces: Vec<Vec<f64>> =
        (0..big_n).map(|k| (0..n).map(|i| primal[lp.u_var(k, i)].clamp(0.0, 1.0)).collect()).collect();
    // states are rebuilt from the controls so the dynamics hold to rounding
    let (a, _) = build_matrices(spec)?;
    let mut x_nodes = Vec::with_capacity(big_n + 1);
    x_nodes.push(x0.to_vec());
    for k in 0..big_n {
        let h = lp.grid[k + 1] - lp.grid[k];
        let au = a.mul_vec(&u_pieces[k]);
        let next: Vec<f64> = (0..n).map(|i| x_nodes[k][i] + h * (au[i] + spec.lambda()[i])).collect();
        x_nodes.push(next);
    }
    let costate_intervals: Vec<Vec<f64>> =
        (0..big_n).map(|k| (0..n).map(|i| sol.dual[lp.flow_row(k, i)]).collect()).collect();
    let mut costate_nodes = Vec::with_capacity(big_n + 1);
    costate_nodes.push((0..n).map(|i| sol.dual[lp.init_row(i)]).collect::<Vec<_>>());
    for k in 1..big_n {
        costate_nodes.push((0..n).map(|i| 0.5 * (costate_intervals[k - 1][i] + costate_intervals[k][i])).collect());
    }
    // extrapolate the last half interval from the final slope
    let last = &costate_intervals[big_n - 1];
    let prev = &costate_intervals[big_n - 2];
    let hl = lp.grid[big_n] - lp.grid[big_n - 1];
    let hp = lp.grid[big_n - 1] - lp.grid[big_n - 2];
    costate_nodes.push((0..n).map(|i| last[i] + (last[i] - prev[i]) * hl / (hl + hp)).collect());

    let scale = 1.0 + inf_norm(x0);
    let threshold = config.empty_tol * scale;
    let depletion = (0..n)
        .map(|i| (0..=big_n).find(|&k| x_nodes[k][i] <= threshold).map(|k| lp.grid[k]))
        .collect();
    let objective = sol.objective;
    let out = FluidSolution {
        grid: lp.grid.clone(),
        u_pieces,
        x_nodes,
        objective,
        costate_nodes,
        costate_intervals,
        depletion,
        lp_iterations: sol.iterations,
    };
    let residual = inf_norm(out.x_nodes.last().unwrap());
    if residual > threshold {
        return Err(FluidError::EmptyingFailed { residual, bound: threshold });
    }
    Ok((out, sol.basis))
}

/// Picks one point of the optimal face: every variable with a nonzero reduced
/// cost is pinned, then the first-interval work is maximized from the optimal
/// basis. Without this the initial control of degenerate instances depends on
/// the warm-start path. `None` when the second pass does not finish cleanly.
fn canonical_primal(lp: &FluidLp, sol: &LpSolution<f64>, config: &DiscretizationConfig) -> Option<Vec<f64>> {
    let mut face = lp.problem.clone();
    let mut free = 0;
    for j in 0..face.num_vars() {
        if sol.reduced_costs[j].abs() > config.feas_tol {
            face.lower[j] = sol.primal[j];
            face.upper[j] = sol.primal[j];
        } else {
            free += 1;
        }
    }
    if free == face.num_rows() {
        return None;
    }
    face.cost.iter_mut().for_each(|c| *c = 0.0);
    for i in 0..lp.n {
        face.cost[lp.u_var(0, i)] = -1.0;
    }
    let opts = LpOptions { feas_tol: config.feas_tol, max_iters: config.max_iters, initial_basis: Some(sol.basis.clone()) };
    match solve_lp_with(&face, &opts) {
        Ok(s) if s.status == LpStatus::Optimal => Some(s.primal),
        _ => None,
    }
}

/// Solves the fluid control problem from `x0`.
pub fn solve_fluid(spec: &NetworkSpec<f64>, x0: &[f64], config: &DiscretizationConfig) -> Result<FluidSolution, FluidError> {
    let lp = discretize(spec, x0, config)?;
    let (sol, _) = solve_discretized(spec, x0, &lp, config, None)?;
    if !config.refine {
        return Ok(sol);
    }
    let grid = refined_grid(&sol, 1e-6);
    if grid.len() == sol.grid.len() {
        return Ok(sol);
    }
    let lp = discretize_on_grid(spec, x0, grid)?;
    Ok(solve_discretized(spec, x0, &lp, config, None)?.0)
}

/// Solves many initial states on one fixed grid. The discretized LPs differ
/// only in the initial-state rows, so each solve restarts the dual simplex
/// from the previous optimal basis.
#[derive(Debug, Clone)]
pub struct BatchSolver<'a> {
    spec: &'a NetworkSpec<f64>,
    config: DiscretizationConfig,
    lp: FluidLp,
    basis: Option<Vec<usize>>,
}

impl<'a> BatchSolver<'a> {
    /// `config.horizon` must be fixed; refinement is not applied.
    pub fn new(spec: &'a NetworkSpec<f64>, config: &DiscretizationConfig) -> Result<Self, FluidError> {
        config.validate()?;
        let Horizon::Fixed(t) = config.horizon else {
            return Err(FluidError::InvalidConfig("batch solves need a fixed horizon".into()));
        };
        let lp = discretize_on_grid(spec, &vec![0.0; spec.n()], time_grid(t, config.intervals, config.grading))?;
        Ok(BatchSolver { spec, config: config.clone(), lp, basis: None })
    }

    pub fn solve(&mut self, x0: &[f64]) -> Result<FluidSolution, FluidError> {
        check_state(self.spec, x0)?;
        for (i, &v) in x0.iter().enumerate() {
            let row = self.lp.init_row(i);
            self.lp.problem.eq_rhs[row] = v;
        }
        let warm = solve_discretized(self.spec, x0, &self.lp, &self.config, self.basis.as_deref());
        let result = match warm {
            Err(FluidError::Lp(_)) if self.basis.is_some() => {
                solve_discretized(self.spec, x0, &self.lp, &self.config, None)
            }
            other => other,
        };
        match result {
            Ok((sol, basis)) => {
                self.basis = Some(basis);
                Ok(sol)
            }
            Err(e) => Err(e),
        }
    }
}

/// Smallest horizon that is at least the default horizon of every listed state.
pub fn common_horizon<'x>(
    spec: &NetworkSpec<f64>,
    states: impl IntoIterator<Item = &'x [f64]>,
) -> Result<f64, FluidError> {
    let mut t: f64 = 0.0;
    for x in states {
        t = t.max(default_horizon(spec, x)?);
    }
    Ok(if t > 0.0 { t } else { 1.0 })
}

/// Splits every interval adjacent to a control change into four.
pub fn refined_grid(sol: &FluidSolution, change_tol: f64) -> Vec<f64> {
    let big_n = sol.intervals();
    let differs = |a: &[f64], b: &[f64]| a.iter().zip(b).any(|(p, q)| (p - q).abs() > change_tol);
    let mut grid = vec![sol.grid[0]];
    for k in 0..big_n {
        let split = (k > 0 && differs(&sol.u_pieces[k], &sol.u_pieces[k - 1]))
            || (k + 1 < big_n && differs(&sol.u_pieces[k], &sol.u_pieces[k + 1]));
        let (t0, t1) = (sol.grid[k], sol.grid[k + 1]);
        if split {
            for q in 1..4 {
                grid.push(t0 + (t1 - t0) * q as f64 / 4.0);
            }
        }
        grid.push(t1);
    }
    grid
}

/// Control applied at time zero.
pub fn initial_control(sol: &FluidSolution) -> Vec<f64> {
    sol.u_pieces[0].clone()
}

/// `r = y^T A`; each server serves the constituent class with the most negative index.
pub fn priority_indices(spec: &NetworkSpec<f64>, costate: &[f64]) -> Result<Vec<f64>, FluidError> {
    let (a, _) = build_matrices(spec)?;
    Ok(a.tr_mul_vec(costate))
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorityCheck {
    pub interval: usize,
    pub server: usize,
    /// `(class, priority index)` for every class of the server.
    pub indices: Vec<(usize, f64)>,
    /// Class receiving the most effort, if the server works at all.
    pub served: Option<usize>,
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PontryaginReport {
    pub checks: Vec<PriorityCheck>,
    /// Fraction of (interval, server) pairs whose effort goes only to classes
    /// with minimal non-positive priority index.
    pub pass_fraction: f64,
    pub terminal_costate: f64,
    pub terminal_bound: f64,
    pub terminal_ok: bool,
    /// Fraction of (interval, class) pairs with the class empty throughout the
    /// interval whose costate is within tolerance of zero. `None` if no class is
    /// ever empty over a whole interval.
    pub empty_costate_fraction: Option<f64>,
    pub tol_used: f64,
}

impl PontryaginReport {
    pub fn passed(&self, min_fraction: f64) -> bool {
        self.pass_fraction >= min_fraction && self.terminal_ok
    }
}

/// Checks the maximum-principle conditions on the extracted costate. `tol` is
/// relative to the largest priority index magnitude.
pub fn verify_pontryagin(spec: &NetworkSpec<f64>, sol: &FluidSolution, tol: f64) -> Result<PontryaginReport, FluidError> {
    let (a, d) = build_matrices(spec)?;
    let (n, m) = (spec.n(), spec.m());
    let r: Vec<Vec<f64>> = sol.costate_intervals.iter().map(|y| a.tr_mul_vec(y)).collect();
    let scale = r.iter().map(|v| inf_norm(v)).fold(1.0, f64::max);
    let tol_abs = tol * scale;
    let mut checks = Vec::with_capacity(sol.intervals() * m);
    for (k, (u, rk)) in sol.u_pieces.iter().zip(&r).enumerate() {
        for j in 0..m {
            let classes: Vec<usize> = (0..n).filter(|&i| d.server_of(i) == j).collect();
            let min_r = classes.iter().map(|&i| rk[i]).fold(0.0, f64::min);
            let mut violation: f64 = 0.0;
            let mut served = None;
            let mut best = tol_abs.min(1e-9);
            for &i in &classes {
                if u[i] > tol_abs.min(1e-6) {
                    violation = violation.max(rk[i] - min_r);
                }
                if u[i] > best {
                    best = u[i];
                    served = Some(i);
                }
            }
            checks.push(PriorityCheck {
                interval: k,
                server: j,
                indices: classes.iter().map(|&i| (i, rk[i])).collect(),
                served,
                violation,
            });
        }
    }
    let passing = checks.iter().filter(|c| c.violation <= tol_abs).count();
    let pass_fraction = if checks.is_empty() { 1.0 } else { passing as f64 / checks.len() as f64 };

    let c_norm = inf_norm(spec.c());
    let terminal_costate = inf_norm(sol.costate_nodes.last().unwrap());
    let terminal_bound = tol * (1.0 + c_norm * sol.horizon());

    let x_scale = 1.0 + inf_norm(&sol.x_nodes[0]);
    let (mut empty, mut empty_ok) = (0usize, 0usize);
    let y_tol = tol * (1.0 + c_norm * sol.horizon());
    for k in 0..sol.intervals() {
        for i in 0..n {
            if sol.x_nodes[k][i] <= 1e-9 * x_scale && sol.x_nodes[k + 1][i] <= 1e-9 * x_scale {
                empty += 1;
                if sol.costate_intervals[k][i].abs() <= y_tol {
                    empty_ok += 1;
                }
            }
        }
    }
    Ok(PontryaginReport {
        checks,
        pass_fraction,
        terminal_costate,
        terminal_bound,
        terminal_ok: terminal_costate <= terminal_bound,
        empty_costate_fraction: (empty > 0).then(|| empty_ok as f64 / empty as f64),
        tol_used: tol_abs,
    })
}
