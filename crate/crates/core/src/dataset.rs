//! Labeled state/control datasets for policy learning.
//!
//! Initial states are drawn from the non-negative part of the unit sphere
//! restricted to a support pattern, solved with the fluid solver, and labeled
//! with the optimal control at the requested sampling times. Scaling a state
//! keeps its optimal label, so datasets are augmented with scaled copies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::fluid::{
    common_horizon, resolve_horizon, solve_fluid, BatchSolver, DiscretizationConfig, FluidError, FluidSolution, Horizon,
};
use crate::network::NetworkSpec;

/// Default relative threshold below which a class counts as empty.
pub const EPS_ZERO: f64 = 1e-7;
/// Labels are control vectors rounded to this many decimals.
pub const LABEL_DECIMALS: i32 = 6;
const LABEL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("state has no non-empty class")]
    EmptyPattern,
    #[error("invalid support pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("{failed} of {total} instances failed to solve")]
    TooManyFailures { failed: usize, total: usize },
    #[error("pattern {0} appears in more than one cell")]
    OverlappingCells(SupportPattern),
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Set of non-empty classes, stored as sorted 0-based indices. Serialized as
/// a 1-based index list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportPattern(Vec<usize>);

impl SupportPattern {
    pub fn new(classes: impl IntoIterator<Item = usize>) -> Result<Self, DatasetError> {
        let set: BTreeSet<usize> = classes.into_iter().collect();
        if set.is_empty() {
            return Err(DatasetError::EmptyPattern);
        }
        Ok(SupportPattern(set.into_iter().collect()))
    }

    /// Pattern with every class non-empty.
    pub fn full(n: usize) -> Self {
        SupportPattern((0..n).collect())
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportPattern) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn check_dim(&self, n: usize) -> Result<(), DatasetError> {
        match self.0.last() {
            Some(&i) if i >= n => Err(DatasetError::InvalidPattern(format!("{self} has a class beyond {n}"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SupportPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", inner.join(","))
    }
}

impl Serialize for SupportPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(|i| i + 1))
    }
}

impl<'de> Deserialize<'de> for SupportPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<usize>::deserialize(d)?;
        if raw.contains(&0) {
            return Err(serde::de::Error::custom("pattern classes are 1-based"));
        }
        SupportPattern::new(raw.into_iter().map(|i| i - 1)).map_err(serde::de::Error::custom)
    }
}

/// `{i : x_i > eps_zero (1 + |x|_inf)}`
pub fn support_pattern(x: &[f64], eps_zero: f64) -> Result<SupportPattern, DatasetError> {
    let thresh = eps_zero * (1.0 + x.iter().fold(0.0f64, |a, &b| a.max(b.abs())));
    SupportPattern::new((0..x.len()).filter(|&i| x[i] > thresh))
}

/// All `2^n - 1` non-empty patterns, ordered by size and then lexicographically.
pub fn all_patterns(n: usize) -> Vec<SupportPattern> {
    assert!(n < 25, "pattern enumeration is limited to small n");
    let mut out: Vec<SupportPattern> =
        (1u32..(1 << n)).map(|mask| SupportPattern((0..n).filter(|&i| mask >> i & 1 == 1).collect())).collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Uniform sample from the positive unit sphere on the pattern's coordinates.
pub fn sample_initial_state<R: rand::Rng + ?Sized>(pattern: &SupportPattern, n: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; n];
    loop {
        for &i in pattern.classes() {
            let z: f64 = StandardNormal.sample(rng);
            x[i] = z.abs();
        }
        let norm = pattern.classes().iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for &i in pattern.classes() {
                x[i] /= norm;
            }
            return x;
        }
    }
}

/// Rounds a control to the label precision.
pub fn round_label(u: &[f64]) -> Vec<f64> {
    let scale = 10f64.powi(LABEL_DECIMALS);
    // adding 0.0 turns -0.0 into +0.0
    u.iter().map(|v| (v * scale).round() / scale + 0.0).collect()
}

fn same_control(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(p, q)| (p - q).abs() <= LABEL_TOL)
}

/// Bijection between label ids and rounded control vectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelBook {
    labels: Vec<Vec<f64>>,
}

impl LabelBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn control(&self, id: usize) -> Option<&[f64]> {
        self.labels.get(id).map(|v| v.as_slice())
    }

    pub fn labels(&self) -> &[Vec<f64>] {
        &self.labels
    }

    /// Id of an existing label within tolerance of the rounded control.
    pub fn find(&self, u: &[f64]) -> Option<usize> {
        let r = round_label(u);
        self.labels.iter().position(|l| l.len() == r.len() && same_control(l, &r))
    }

    /// Existing id for `u`, or a freshly minted one.
    pub fn canonical_label(&mut self, u: &[f64]) -> usize {
        if let Some(id) = self.find(u) {
            return id;
        }
        self.labels.push(round_label(u));
        self.labels.len() - 1
    }

    /// Classes receiving full effort under label `id` (1-based for display).
    pub fn prioritized(&self, id: usize) -> Vec<usize> {
        self.control(id)
            .map(|u| u.iter().enumerate().filter(|(_, &v)| v >= 1.0 - LABEL_TOL).map(|(i, _)| i + 1).collect())
            .unwrap_or_default()
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let book: LabelBook = serde_json::from_str(text)?;
        for (i, a) in book.labels.iter().enumerate() {
            for b in &book.labels[..i] {
                if a.len() == b.len() && same_control(a, b) {
                    return Err(DatasetError::Malformed("duplicate labels in label book".into()));
                }
            }
        }
        Ok(book)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub label: usize,
    pub pattern: SupportPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    n: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(n: usize) -> Self {
        Dataset { n, samples: Vec::new() }
    }

    pub fn from_samples(n: usize, samples: Vec<LabeledSample>) -> Result<Self, DatasetError> {
        if let Some(s) = samples.iter().find(|s| s.x.len() != n) {
            return Err(DatasetError::Malformed(format!("sample of length {} in a dataset of dimension {n}", s.x.len())));
        }
        Ok(Dataset { n, samples })
    }

    /// Adds `(x, label)` with the pattern of `x`; empty states are rejected.
    pub fn push(&mut self, x: Vec<f64>, label: usize, eps_zero: f64) -> Result<(), DatasetError> {
        if x.len() != self.n {
            return Err(DatasetError::Malformed(format!("state of length {} in a dataset of dimension {}", x.len(), self.n)));
        }
        let pattern = support_pattern(&x, eps_zero)?;
        self.samples.push(LabeledSample { x, label, pattern });
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn extend(&mut self, other: Dataset) {
        assert_eq!(self.n, other.n, "datasets of different dimension");
        self.samples.extend(other.samples);
    }

    /// Samples with the given pattern.
    pub fn filter_pattern(&self, pattern: &SupportPattern) -> Dataset {
        Dataset { n: self.n, samples: self.samples.iter().filter(|s| &s.pattern == pattern).cloned().collect() }
    }

    /// Sample count per label id.
    pub fn label_counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.label).or_insert(0) += 1;
        }
        out
    }

    pub fn pattern_counts(&self) -> BTreeMap<SupportPattern, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.pattern.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Median Euclidean norm of the states, or 0 for an empty dataset.
    pub fn median_norm(&self) -> f64 {
        let mut norms: Vec<f64> = self.samples.iter().map(|s| s.x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        if norms.is_empty() {
            return 0.0;
        }
        norms.sort_by(f64::total_cmp);
        let k = norms.len() / 2;
        if norms.len() % 2 == 1 {
            norms[k]
        } else {
            0.5 * (norms[k - 1] + norms[k])
        }
    }

    /// Writes `x_1,...,x_n,label_id`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.n).map(|i| format!("x_{i}")).collect();
        header.push("label_id".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
            rec.push(s.label.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of `write_csv`; patterns are recomputed with `eps_zero`.
    pub fn read_csv<R: Read>(input: R, eps_zero: f64) -> Result<Self, DatasetError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let n = header.len().checked_sub(1).filter(|&n| n > 0).ok_or_else(|| {
            DatasetError::Malformed("expected columns x_1..x_n,label_id".into())
        })?;
        if header.get(n) != Some("label_id") {
            return Err(DatasetError::Malformed("last column must be label_id".into()));
        }
        let mut ds = Dataset::new(n);
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64, DatasetError> {
                rec.get(j)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite() && *v >= 0.0)
                    .ok_or_else(|| DatasetError::Malformed(format!("row {}: bad value in column {}", row + 1, j + 1)))
            };
            let x = (0..n).map(parse).collect::<Result<Vec<_>, _>>()?;
            let label = rec
                .get(n)
                .and_then(|v| v.trim().parse::<usize>().ok())
                .ok_or_else(|| DatasetError::Malformed(format!("row {}: bad label", row + 1)))?;
            ds.push(x, label, eps_zero)?;
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub patterns: Vec<SupportPattern>,
    /// Initial states per pattern.
    pub per_pattern: usize,
    /// Sampling times as fractions of each instance's default horizon, in `[0, 1)`.
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Kept for configuration compatibility; the grid-doubling rule ignores it.
    pub ambiguity_margin: f64,
    /// Drop samples whose label changes when the grid is doubled.
    pub filter: bool,
    pub eps_zero: f64,
    pub seed: u64,
    /// Instances solved in sequence with warm starts. Results depend on the
    /// chunk size but not on the number of threads.
    pub chunk_size: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            patterns: Vec::new(),
            per_pattern: 1000,
            times: vec![0.0],
            alphas: Vec::new(),
            ambiguity_margin: 0.0,
            filter: true,
            eps_zero: EPS_ZERO,
            seed: 0,
            chunk_size: 64,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self, n: usize) -> Result<(), DatasetError> {
        if self.patterns.is_empty() {
            return Err(DatasetError::InvalidConfig("no patterns requested".into()));
        }
        for p in &self.patterns {
            p.check_dim(n)?;
        }
        if self.per_pattern == 0 || self.chunk_size == 0 {
            return Err(DatasetError::InvalidConfig("instance and chunk counts must be positive".into()));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(DatasetError::InvalidConfig("sampling times must lie in [0, 1)".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(DatasetError::InvalidConfig("scaling factors must be positive".into()));
        }
        if !(self.eps_zero > 0.0) {
            return Err(DatasetError::InvalidConfig("eps_zero must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub instances: usize,
    pub solved: usize,
    pub failed: usize,
    /// Samples dropped by the grid-doubling filter.
    pub filtered: usize,
    /// Samples skipped because the state at the sampling time was empty.
    pub empty: usize,
    pub samples: usize,
    /// Largest `|x(T)|_inf / (1 + |x0|_inf)` over solved instances.
    pub max_terminal_residual: f64,
    /// First few solver error messages.
    pub errors: Vec<String>,
}

/// Keep or drop verdict of the grid-doubling check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FilterVerdict {
    Keep,
    Drop,
}

/// Re-solves `x0` on a doubled grid and keeps it only if the initial-control
/// labels agree. Solver errors drop the instance. `_margin` is unused by this rule.
pub fn ambiguity_filter(spec: &NetworkSpec<f64>, x0: &[f64], scfg: &DiscretizationConfig, _margin: f64) -> FilterVerdict {
    let fine = DiscretizationConfig { intervals: 2 * scfg.intervals, ..scfg.clone() };
    match (solve_fluid(spec, x0, scfg), solve_fluid(spec, x0, &fine)) {
        (Ok(a), Ok(b)) if same_control(&round_label(&a.u_pieces[0]), &round_label(&b.u_pieces[0])) => FilterVerdict::Keep,
        _ => FilterVerdict::Drop,
    }
}

fn terminal_residual(sol: &FluidSolution) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    inf(sol.x_nodes.last().unwrap()) / (1.0 + inf(&sol.x_nodes[0]))
}

struct Labeled {
    x: Vec<f64>,
    u: Vec<f64>,
}

enum Outcome {
    Solved { kept: Vec<Labeled>, filtered: usize, empty: usize, residual: f64 },
    Failed(String),
}

/// Initial states in instance order: `per_pattern` states for each pattern in turn.
pub fn sample_states(n: usize, gcfg: &GenerationConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(gcfg.seed);
    let mut out = Vec::with_capacity(gcfg.patterns.len() * gcfg.per_pattern);
    for p in &gcfg.patterns {
        for _ in 0..gcfg.per_pattern {
            out.push(sample_initial_state(p, n, &mut rng));
        }
    }
    out
}

fn solve_chunk(
    spec: &NetworkSpec<f64>,
    states: &[Vec<f64>],
    gcfg: &GenerationConfig,
    scfg: &DiscretizationConfig,
    horizon: f64,
) -> Result<Vec<Outcome>, FluidError> {
    let coarse_cfg = DiscretizationConfig { horizon: Horizon::Fixed(horizon), refine: false, ..scfg.clone() };
    let fine_cfg = DiscretizationConfig { intervals: 2 * scfg.intervals, ..coarse_cfg.clone() };
    let mut coarse = BatchSolver::new(spec, &coarse_cfg)?;
    let mut fine = if gcfg.filter { Some(BatchSolver::new(spec, &fine_cfg)?) } else { None };
    let mut out: Vec<Option<Outcome>> = (0..states.len()).map(|_| None).collect();
    for idx in chain_order(states) {
        let x0 = &states[idx];
        let slot = &mut out[idx];
        let solved = resolve_horizon(spec, x0, scfg).and_then(|t| Ok((t, coarse.solve(x0)?)));
        let (own_t, sol) = match solved {
            Ok(s) => s,
            Err(e) => {
                *slot = Some(Outcome::Failed(e.to_string()));
                continue;
            }
        };
        let fine_sol = match fine.as_mut().map(|f| f.solve(x0)) {
            None => None,
            Some(Ok(s)) => Some(s),
            Some(Err(e)) => {
                *slot = Some(Outcome::Failed(e.to_string()));
                continue;
            }
        };
        let (mut kept, mut filtered, mut empty) = (Vec::new(), 0, 0);
        for &frac in &gcfg.times {
            let t = frac * own_t;
            let (x, u) = if frac == 0.0 {
                (x0.clone(), sol.u_pieces[0].clone())
            } else {
                (sol.state_at(t), sol.control_at(t).to_vec())
            };
            if support_pattern(&x, gcfg.eps_zero).is_err() {
                empty += 1;
                continue;
            }
            if let Some(f) = &fine_sol {
                let uf = if frac == 0.0 { &f.u_pieces[0][..] } else { f.control_at(t) };
                if !same_control(&round_label(&u), &round_label(uf)) {
                    filtered += 1;
                    continue;
                }
            }
            kept.push(Labeled { x, u });
        }
        *slot = Some(Outcome::Solved { kept, filtered, empty, residual: terminal_residual(&sol) });
    }
    Ok(out.into_iter().map(|o| o.expect("every instance visited")).collect())
}

/// Greedy nearest-neighbour visiting order, so consecutive warm starts are close.
fn chain_order(states: &[Vec<f64>]) -> Vec<usize> {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    let mut rest: Vec<usize> = (1..states.len()).collect();
    let mut order = Vec::with_capacity(states.len());
    if states.is_empty() {
        return order;
    }
    order.push(0);
    while !rest.is_empty() {
        let last = &states[*order.last().unwrap()];
        let (k, _) = rest
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, dist(&states[i], last)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        order.push(rest.remove(k));
    }
    order
}

/// Samples, solves and labels `per_pattern` initial states for every pattern.
/// Instance failures are counted; the call fails only when more than 20% of
/// the instances fail.
pub fn generate(
    spec: &NetworkSpec<f64>,
    gcfg: &GenerationConfig,
    scfg: &DiscretizationConfig,
) -> Result<(Dataset, LabelBook, GenerationStats), DatasetError> {
    gcfg.validate(spec.n())?;
    scfg.validate()?;
    let states = sample_states(spec.n(), gcfg);
    // one grid for the whole batch, so every label comes from the same discretization
    let horizon = match scfg.horizon {
        Horizon::Fixed(t) => t,
        Horizon::Auto => common_horizon(spec, states.iter().map(|x| x.as_slice()))?,
    };
    let chunks: Vec<Vec<Outcome>> = states
        .par_chunks(gcfg.chunk_size)
        .map(|chunk| {
            solve_chunk(spec, chunk, gcfg, scfg, horizon)
                .unwrap_or_else(|e| chunk.iter().map(|_| Outcome::Failed(e.to_string())).collect())
        })
        .collect();

    let mut stats = GenerationStats { instances: states.len(), ..Default::default() };
    let mut book = LabelBook::new();
    let mut ds = Dataset::new(spec.n());
    for outcome in chunks.into_iter().flatten() {
        match outcome {
            Outcome::Failed(msg) => {
                stats.failed += 1;
                if stats.errors.len() < 10 {
                    stats.errors.push(msg);
                }
            }
            Outcome::Solved { kept, filtered, empty, residual } => {
                stats.solved += 1;
                stats.filtered += filtered;
                stats.empty += empty;
                stats.max_terminal_residual = stats.max_terminal_residual.max(residual);
                for s in kept {
                    let label = book.canonical_label(&s.u);
                    ds.push(s.x, label, gcfg.eps_zero)?;
                }
            }
        }
    }
    stats.samples = ds.len();
    if stats.failed * 5 > stats.instances {
        return Err(DatasetError::TooManyFailures { failed: stats.failed, total: stats.instances });
    }
    if stats.failed > 0 {
        log::warn!("{} of {} instances failed to solve", stats.failed, stats.instances);
    }
    Ok((ds, book, stats))
}

/// Appends `(alpha x, label)` for every sample and every `alpha`, in order.
pub fn augment(ds: &Dataset, alphas: &[f64]) -> Dataset {
    let mut out = ds.clone();
    for &alpha in alphas {
        for s in &ds.samples {
            out.samples.push(LabeledSample {
                x: s.x.iter().map(|v| alpha * v).collect(),
                label: s.label,
                pattern: s.pattern.clone(),
            });
        }
    }
    out
}

/// Datasets routed by pattern cell, plus samples no cell claims.
#[derive(Debug, Clone)]
pub struct Partition {
    pub cells: Vec<Dataset>,
    pub leftover: Dataset,
}

/// Routes each sample to the cell listing its pattern.
pub fn partition(ds: &Dataset, cells: &[Vec<SupportPattern>]) -> Result<Partition, DatasetError> {
    let mut owner: BTreeMap<&SupportPattern, usize> = BTreeMap::new();
    for (c, cell) in cells.iter().enumerate() {
        for p in cell {
            if let Some(&prev) = owner.get(p) {
                if prev != c {
                    return Err(DatasetError::OverlappingCells(p.clone()));
                }
            }
            owner.insert(p, c);
        }
    }
    let mut out = Partition { cells: vec![Dataset::new(ds.n); cells.len()], leftover: Dataset::new(ds.n) };
    for s in &ds.samples {
        match owner.get(&s.pattern) {
            Some(&c) => out.cells[c].samples.push(s.clone()),
            None => out.leftover.samples.push(s.clone()),
        }
    }
    if !out.leftover.is_empty() {
        log::warn!("{} samples fall outside every partition cell", out.leftover.len());
    }
    Ok(out)
}
