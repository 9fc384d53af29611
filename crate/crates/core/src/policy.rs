//! State-feedback policies assembled from trained trees, and closed-loop
//! simulation of the fluid model under such a policy.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{support_pattern, DatasetError, LabelBook, SupportPattern};
use crate::fluid::{resolve_horizon, solve_fluid, DiscretizationConfig, FluidError};
use crate::network::{build_matrices, NetworkSpec};
use crate::octree::{ObliqueTree, TreeError};

/// Default emptiness threshold for routing. Labels are rounded, so a class
/// held at zero by a decoded control can drift upward by about `1e-6` per unit
/// time; the threshold has to stay above what accumulates over a horizon.
pub const POLICY_EPS_ZERO: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no tree covers pattern {0} or any superset of it")]
    NoApplicableTree(SupportPattern),
    #[error("tree predicts label {0}, which is not in the label book")]
    UnknownLabel(usize),
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("state must be finite, non-negative and of length {0}")]
    InvalidState(usize),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// How states whose pattern no cell lists are routed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackRule {
    /// Cell of the superset pattern with the fewest extra classes; ties go to
    /// the lexicographically smallest class list.
    ClosestSuperset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCell {
    pub patterns: Vec<SupportPattern>,
    pub tree: ObliqueTree,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PolicyParts")]
pub struct PartitionedPolicy {
    n: usize,
    cells: Vec<PolicyCell>,
    book: LabelBook,
    eps_zero: f64,
    fallback: FallbackRule,
    #[serde(skip)]
    owner: BTreeMap<SupportPattern, usize>,
}

#[derive(Deserialize)]
struct PolicyParts {
    n: usize,
    cells: Vec<PolicyCell>,
    book: LabelBook,
    eps_zero: f64,
    fallback: FallbackRule,
}

impl TryFrom<PolicyParts> for PartitionedPolicy {
    type Error = PolicyError;

    fn try_from(p: PolicyParts) -> Result<Self, PolicyError> {
        PartitionedPolicy::new(p.n, p.cells, p.book, p.eps_zero, p.fallback)
    }
}

/// Outcome of routing one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub control: Vec<f64>,
    /// `None` for the empty state.
    pub label: Option<usize>,
    pub cell: Option<usize>,
    pub fallback: bool,
}

impl PartitionedPolicy {
    pub fn new(
        n: usize,
        cells: Vec<PolicyCell>,
        book: LabelBook,
        eps_zero: f64,
        fallback: FallbackRule,
    ) -> Result<Self, PolicyError> {
        if !(eps_zero > 0.0 && eps_zero.is_finite()) {
            return Err(PolicyError::Invalid(format!("eps_zero must be positive, got {eps_zero}")));
        }
        if book.labels().iter().any(|u| u.len() != n) {
            return Err(PolicyError::Invalid(format!("label book entries must have length {n}")));
        }
        let mut owner = BTreeMap::new();
        for (c, cell) in cells.iter().enumerate() {
            cell.tree.validate()?;
            if cell.tree.n != n {
                return Err(PolicyError::Invalid(format!("cell {c} tree has dimension {}, expected {n}", cell.tree.n)));
            }
            if let Some(&bad) = cell.tree.leaf_labels().iter().find(|&&l| l >= book.len()) {
                return Err(PolicyError::UnknownLabel(bad));
            }
            for p in &cell.patterns {
                p.check_dim(n)?;
                if owner.insert(p.clone(), c).is_some() {
                    return Err(DatasetError::OverlappingCells(p.clone()).into());
                }
            }
        }
        Ok(PartitionedPolicy { n, cells, book, eps_zero, fallback, owner })
    }

    /// One tree for every non-empty state. Patterns are listed explicitly up to
    /// 16 classes; beyond that only the full pattern is, and the rest reach it
    /// through the fallback rule.
    pub fn single(tree: ObliqueTree, book: LabelBook, eps_zero: f64) -> Result<Self, PolicyError> {
        let n = tree.n;
        let patterns = if n <= 16 { crate::dataset::all_patterns(n) } else { vec![SupportPattern::full(n)] };
        Self::new(n, vec![PolicyCell { patterns, tree }], book, eps_zero, FallbackRule::ClosestSuperset)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[PolicyCell] {
        &self.cells
    }

    pub fn book(&self) -> &LabelBook {
        &self.book
    }

    pub fn eps_zero(&self) -> f64 {
        self.eps_zero
    }

    /// Cell index for `pattern` and whether the fallback rule was used.
    pub fn route(&self, pattern: &SupportPattern) -> Result<(usize, bool), PolicyError> {
        if let Some(&c) = self.owner.get(pattern) {
            return Ok((c, false));
        }
        let FallbackRule::ClosestSuperset = self.fallback;
        self.owner
            .iter()
            .filter(|(p, _)| pattern.is_subset_of(p))
            .min_by(|(p, _), (q, _)| p.len().cmp(&q.len()).then_with(|| p.classes().cmp(q.classes())))
            .map(|(_, &c)| (c, true))
            .ok_or_else(|| PolicyError::NoApplicableTree(pattern.clone()))
    }

    pub fn decide(&self, x: &[f64]) -> Result<Decision, PolicyError> {
        if x.len() != self.n || x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PolicyError::InvalidState(self.n));
        }
        let pattern = match support_pattern(x, self.eps_zero) {
            Ok(p) => p,
            Err(DatasetError::EmptyPattern) => {
                return Ok(Decision { control: vec![0.0; self.n], label: None, cell: None, fallback: false });
            }
            Err(e) => return Err(e.into()),
        };
        let (cell, fallback) = self.route(&pattern)?;
        let label = self.cells[cell].tree.predict(x);
        let control = self.book.control(label).ok_or(PolicyError::UnknownLabel(label))?.to_vec();
        Ok(Decision { control, label: Some(label), cell: Some(cell), fallback })
    }

    /// Control for state `x`; the empty state gets the zero control.
    pub fn act(&self, x: &[f64]) -> Result<Vec<f64>, PolicyError> {
        Ok(self.decide(x)?.control)
    }

    pub fn to_json(&self) -> Result<String, PolicyError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Makes `u` feasible for state `x` over one Euler step of length `h`.
///
/// Entries are clipped to `[0, 1]` and each overloaded server is scaled back.
/// Then a class with negative drift that is empty, or that the step would
/// overshoot below zero, has its own effort cut so the step ends at or above
/// zero (exactly zero for empty classes). Freed effort is not handed to other
/// classes.
pub fn feasible_projection(spec: &NetworkSpec<f64>, x: &[f64], u: &[f64], h: f64, eps_zero: f64) -> Vec<f64> {
    let n = spec.n();
    let mut u: Vec<f64> = u.iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect();
    for j in 0..spec.m() {
        let classes = spec.classes_of(j);
        let load: f64 = classes.iter().map(|&i| u[i]).sum();
        if load > 1.0 {
            let mut scale = 1.0 / load;
            // rounding can leave the sum a few ulps above one
            while classes.iter().map(|&i| u[i] * scale).sum::<f64>() > 1.0 {
                scale *= 1.0 - 4.0 * f64::EPSILON;
            }
            for &i in &classes {
                u[i] *= scale;
            }
        }
    }
    let thresh = eps_zero * (1.0 + inf_norm(x));
    // cutting a class only lowers downstream inflow, so the sweep settles within n passes
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            let inflow = inflow(spec, &u, i);
            let mu = spec.mu()[i];
            let drift = inflow - mu * u[i];
            if drift >= 0.0 || (x[i] > thresh && x[i] + h * drift >= 0.0) {
                continue;
            }
            let level = if x[i] > thresh { x[i] } else { 0.0 };
            let cap = ((level / h + inflow) / mu).clamp(0.0, 1.0);
            if cap < u[i] {
                u[i] = cap;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    u
}

/// Exogenous plus routed inflow rate into class `i` under `u`.
fn inflow(spec: &NetworkSpec<f64>, u: &[f64], i: usize) -> f64 {
    let routed: f64 = (0..spec.n()).filter(|&p| spec.successor(p) == Some(i)).map(|p| spec.mu()[p] * u[p]).sum();
    spec.lambda()[i] + routed
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedLoopResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Control applied on `[times[k], times[k+1])`.
    pub controls: Vec<Vec<f64>>,
    pub cost: f64,
    /// Largest amount added by clamping a state coordinate at zero.
    pub max_violation: f64,
    pub terminal_norm: f64,
    pub fallback_steps: usize,
}

impl ClosedLoopResult {
    /// CSV with columns `t, x_1..x_n, u_1..u_n`; the last row repeats the last control.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("u_{i}")));
        w.write_record(&header)?;
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let u = self.controls.get(k).or(self.controls.last());
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            row.extend(u.into_iter().flatten().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Explicit Euler closed loop on `[0, horizon]`; the last step is shortened to land on `horizon`.
pub fn simulate(
    spec: &NetworkSpec<f64>,
    policy: &PartitionedPolicy,
    x0: &[f64],
    horizon: f64,
    h_sim: f64,
) -> Result<ClosedLoopResult, PolicyError> {
    let n = spec.n();
    if x0.len() != n || x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(PolicyError::InvalidState(n));
    }
    if !(h_sim > 0.0 && h_sim.is_finite()) {
        return Err(PolicyError::InvalidStep(h_sim));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(PolicyError::Invalid(format!("horizon must be positive, got {horizon}")));
    }
    if policy.n() != n {
        return Err(PolicyError::Invalid(format!("policy dimension {} does not match network {n}", policy.n())));
    }
    let (a, _) = build_matrices(spec).map_err(FluidError::from)?;
    let holding = |x: &[f64]| x.iter().zip(spec.c()).map(|(v, c)| v * c).sum::<f64>();
    let steps = (horizon / h_sim).ceil().max(1.0) as usize;
    let mut res = ClosedLoopResult {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        controls: Vec::with_capacity(steps),
        cost: 0.0,
        max_violation: 0.0,
        terminal_norm: 0.0,
        fallback_steps: 0,
    };
    let mut x = x0.to_vec();
    let mut t = 0.0;
    for k in 0..steps {
        let h = if k + 1 == steps { horizon - t } else { h_sim };
        let d = policy.decide(&x)?;
        if d.fallback {
            res.fallback_steps += 1;
        }
        let u = feasible_projection(spec, &x, &d.control, h, policy.eps_zero());
        let drift = a.mul_vec(&u);
        let mut next = vec![0.0; n];
        for i in 0..n {
            let v = x[i] + h * (drift[i] + spec.lambda()[i]);
            if v < 0.0 {
                res.max_violation = res.max_violation.max(-v);
                next[i] = 0.0;
            } else {
                next[i] = v;
            }
        }
        res.cost += 0.5 * h * (holding(&x) + holding(&next));
        t = if k + 1 == steps { horizon } else { t + h };
        res.times.push(t);
        res.states.push(next.clone());
        res.controls.push(u);
        x = next;
    }
    res.terminal_norm = inf_norm(&x);
    Ok(res)
}

/// Closed-loop cost over the solver's optimal cost from `x0`, both on the
/// horizon resolved by `scfg`. A zero optimum with zero closed-loop cost gives 1.
pub fn compare_cost(
    spec: &NetworkSpec<f64>,
    policy: &PartitionedPolicy,
    x0: &[f64],
    scfg: &DiscretizationConfig,
    h_sim: Option<f64>,
) -> Result<f64, PolicyError> {
    let horizon = resolve_horizon(spec, x0, scfg)?;
    let h = h_sim.unwrap_or(default_step(horizon));
    let sim = simulate(spec, policy, x0, horizon, h)?;
    let opt = solve_fluid(spec, x0, scfg)?.objective;
    if opt <= 0.0 {
        return Ok(if sim.cost <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(sim.cost / opt)
}

/// Default simulation step, `horizon / 2000`.
pub fn default_step(horizon: f64) -> f64 {
    horizon / 2000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::Horizon;
    use crate::network::{make_crisscross, standard_crisscross, standard_rybko_stolyar};

    fn pat(v: &[usize]) -> SupportPattern {
        SupportPattern::new(v.iter().copied()).unwrap()
    }

    fn book(labels: &[&[f64]]) -> LabelBook {
        let mut b = LabelBook::new();
        for u in labels {
            b.canonical_label(u);
        }
        b
    }

    #[test]
    fn empty_state_gets_zero_control() {
        let p = PartitionedPolicy::single(ObliqueTree::constant(3, 0), book(&[&[1.0, 0.0, 1.0]]), 1e-7).unwrap();
        assert_eq!(p.act(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(p.act(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn fallback_picks_the_closest_superset() {
        let b = book(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let cells = vec![
            PolicyCell { patterns: vec![pat(&[0, 1, 2])], tree: ObliqueTree::constant(3, 0) },
            PolicyCell { patterns: vec![pat(&[0, 2])], tree: ObliqueTree::constant(3, 1) },
            PolicyCell { patterns: vec![pat(&[0, 1])], tree: ObliqueTree::constant(3, 2) },
        ];
        let p = PartitionedPolicy::new(3, cells, b, 1e-7, FallbackRule::ClosestSuperset).unwrap();
        assert_eq!(p.route(&pat(&[0, 2])).unwrap(), (1, false));
        // {1} has two supersets with one extra class; {1,2} sorts first
        assert_eq!(p.route(&pat(&[0])).unwrap(), (2, true));
        assert_eq!(p.route(&pat(&[1])).unwrap(), (2, true));
        assert_eq!(p.route(&pat(&[1, 2])).unwrap(), (0, true));
        let d = p.decide(&[1.0, 0.0, 0.0]).unwrap();
        assert!(d.fallback);
        assert_eq!(d.control, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let cells = vec![PolicyCell { patterns: vec![pat(&[0])], tree: ObliqueTree::constant(2, 0) }];
        let p = PartitionedPolicy::new(2, cells, book(&[&[1.0, 0.0]]), 1e-7, FallbackRule::ClosestSuperset).unwrap();
        assert!(matches!(p.act(&[0.0, 1.0]), Err(PolicyError::NoApplicableTree(_))));
    }

    #[test]
    fn assembly_rejects_bad_cells() {
        let cells = vec![
            PolicyCell { patterns: vec![pat(&[0])], tree: ObliqueTree::constant(2, 0) },
            PolicyCell { patterns: vec![pat(&[0])], tree: ObliqueTree::constant(2, 0) },
        ];
        let r = PartitionedPolicy::new(2, cells, book(&[&[1.0, 0.0]]), 1e-7, FallbackRule::ClosestSuperset);
        assert!(matches!(r, Err(PolicyError::Dataset(DatasetError::OverlappingCells(_)))));
        let r = PartitionedPolicy::single(ObliqueTree::constant(2, 3), book(&[&[1.0, 0.0]]), 1e-7);
        assert!(matches!(r, Err(PolicyError::UnknownLabel(3))));
    }

    #[test]
    fn json_round_trip() {
        let b = book(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0]]);
        let p = PartitionedPolicy::single(ObliqueTree::constant(3, 1), b, 1e-7).unwrap();
        let q = PartitionedPolicy::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(q.cells(), p.cells());
        assert_eq!(q.act(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 0.0, 1.0]);
        assert_eq!(q.route(&pat(&[1])).unwrap(), (0, false));
    }

    #[test]
    fn projection_keeps_interior_controls() {
        let spec = standard_crisscross();
        let u = feasible_projection(&spec, &[1.0, 1.0, 1.0], &[0.25, 0.75, 1.0], 0.01, 1e-7);
        assert_eq!(u, vec![0.25, 0.75, 1.0]);
    }

    #[test]
    fn projection_cuts_empty_classes() {
        let spec = make_crisscross([1.0, 1.0, 1.0], 0.0, 0.5, [1.0; 3]).unwrap();
        // class 1 is empty with no inflow
        let u = feasible_projection(&spec, &[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], 0.01, 1e-7);
        assert_eq!(u, vec![0.0, 0.0, 1.0]);
        // overloaded server is scaled back first
        let u = feasible_projection(&spec, &[1.0, 1.0, 1.0], &[1.0, 1.0, 2.0], 0.01, 1e-7);
        assert_eq!(u, vec![0.5, 0.5, 1.0]);
        // class 3 empty: its effort shrinks to the routed inflow
        let spec = standard_crisscross();
        let u = feasible_projection(&spec, &[1.0, 0.0, 0.0], &[1.0, 0.0, 1.0], 0.01, 1e-7);
        assert!((u[2] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rybko_stolyar_boundary_labels_survive_projection() {
        let spec = standard_rybko_stolyar();
        let cfg = DiscretizationConfig::with_intervals(100);
        for x0 in [[1.0, 0.0, 1.0, 1.0], [2.0, 0.0, 0.5, 1.0], [1.0, 1.0, 1.0, 0.0]] {
            let u0 = crate::dataset::round_label(&solve_fluid(&spec, &x0, &cfg).unwrap().u_pieces[0]);
            let u = feasible_projection(&spec, &x0, &u0, 1e-3, 1e-7);
            for (p, q) in u.iter().zip(&u0) {
                assert!((p - q).abs() <= 0.05, "{u:?} vs {u0:?}");
            }
        }
        // the interior rule applied at an empty class 2 loses that class's effort
        let u = feasible_projection(&spec, &[1.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 0.0, 1.0], 1e-3, 1e-7);
        assert_eq!(u, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_system_simulates_to_zero() {
        let spec = make_crisscross([1.0, 1.0, 1.0], 0.0, 0.0, [1.0; 3]).unwrap();
        let p = PartitionedPolicy::single(ObliqueTree::constant(3, 0), book(&[&[1.0, 0.0, 1.0]]), 1e-7).unwrap();
        let r = simulate(&spec, &p, &[0.0; 3], 1.0, 0.01).unwrap();
        assert_eq!(r.cost, 0.0);
        assert!(r.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
        let cfg = DiscretizationConfig { horizon: Horizon::Fixed(1.0), ..Default::default() };
        assert_eq!(compare_cost(&spec, &p, &[0.0; 3], &cfg, None).unwrap(), 1.0);
    }

    #[test]
    fn single_class_optimal_policy_matches_solver_cost() {
        let spec = make_crisscross([2.0, 1.0, 3.0], 0.5, 0.0, [1.0; 3]).unwrap();
        // serve class 1 then class 3 is the only sensible order when class 2 never fills
        let x0 = [1.0, 0.0, 0.0];
        let cfg = DiscretizationConfig::default();
        let u0 = solve_fluid(&spec, &x0, &cfg).unwrap().u_pieces[0].clone();
        let mut b = LabelBook::new();
        let id = b.canonical_label(&crate::dataset::round_label(&u0));
        let p = PartitionedPolicy::single(ObliqueTree::constant(3, id), b, 1e-7).unwrap();
        let ratio = compare_cost(&spec, &p, &x0, &cfg, None).unwrap();
        assert!((0.99..=1.01).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn simulation_respects_constraints() {
        let spec = standard_crisscross();
        let p = PartitionedPolicy::single(ObliqueTree::constant(3, 0), book(&[&[0.0, 1.0, 1.0]]), 1e-7).unwrap();
        let h = 0.01;
        let r = simulate(&spec, &p, &[1.0, 1.0, 1.0], 5.0, h).unwrap();
        let d = crate::network::build_matrices(&spec).unwrap().1;
        for u in &r.controls {
            assert!(u.iter().all(|v| *v >= 0.0));
            assert!(d.mul_vec(u).iter().all(|s| *s <= 1.0));
        }
        assert!(r.max_violation <= h * 0.5 + 1e-12);
        assert!(r.cost > 0.0);
        assert_eq!(r.times.len(), 501);
    }
}
