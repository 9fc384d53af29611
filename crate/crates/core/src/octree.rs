//! Oblique classification trees.
//!
//! Internal nodes test `a^T x <= b` (true goes left). Trees are grown top-down;
//! each split is found by coordinate-wise local search on the Gini impurity
//! from several starting hyperplanes, optionally restricted to at most `k`
//! non-zero coefficients.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, LabelBook};

const IMPROVE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("malformed tree: {0}")]
    Malformed(String),
    #[error("state has length {got}, tree expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    /// Scales to `|a|_2 = 1` with the first non-zero coefficient positive.
    /// Returns `None` for `a = 0`.
    pub fn normalized(a: Vec<f64>, b: f64) -> Option<Self> {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite() && b.is_finite()) {
            return None;
        }
        let first = *a.iter().find(|v| **v != 0.0)?;
        let s = if first < 0.0 { -1.0 / norm } else { 1.0 / norm };
        Some(Hyperplane { a: a.iter().map(|v| v * s + 0.0).collect(), b: b * s + 0.0 })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum()
    }

    pub fn goes_left(&self, x: &[f64]) -> bool {
        self.value(x) <= self.b
    }

    pub fn nnz(&self) -> usize {
        self.a.iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split { a: Vec<f64>, b: f64, left: usize, right: usize },
    Leaf { leaf: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub restarts: usize,
    /// Fraction of the state dimension allowed as non-zero split coefficients.
    pub sparsity: Option<f64>,
    pub coord_iters: usize,
    pub seed: u64,
    pub depth_grid: Vec<usize>,
    pub min_decrease: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_depth: 5,
            min_leaf: 5,
            restarts: 10,
            sparsity: None,
            coord_iters: 50,
            seed: 0,
            depth_grid: vec![3, 5, 10],
            min_decrease: 1e-9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.min_leaf == 0 || self.restarts == 0 || self.coord_iters == 0 {
            return Err(TreeError::InvalidConfig("min_leaf, restarts and coord_iters must be positive".into()));
        }
        if let Some(p) = self.sparsity {
            if !(p > 0.0 && p <= 1.0) {
                return Err(TreeError::InvalidConfig(format!("sparsity must lie in (0, 1], got {p}")));
            }
        }
        if self.depth_grid.is_empty() {
            return Err(TreeError::InvalidConfig("depth grid is empty".into()));
        }
        if !(self.min_decrease >= 0.0) {
            return Err(TreeError::InvalidConfig("min_decrease must be non-negative".into()));
        }
        Ok(())
    }

    /// Coefficient cap `ceil(sparsity n)` for dimension `n`.
    pub fn sparsity_k(&self, n: usize) -> Option<usize> {
        self.sparsity.map(|p| ((p * n as f64).ceil() as usize).clamp(1, n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliqueTree {
    pub n: usize,
    pub nodes: Vec<Node>,
    pub root: usize,
    pub depth: usize,
    pub config: TrainConfig,
}

impl ObliqueTree {
    /// Single-leaf tree.
    pub fn constant(n: usize, label: usize) -> Self {
        ObliqueTree { n, nodes: vec![Node::Leaf { leaf: label }], root: 0, depth: 0, config: TrainConfig::default() }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut k = self.root;
        loop {
            match &self.nodes[k] {
                Node::Leaf { leaf } => return *leaf,
                Node::Split { a, b, left, right } => {
                    let v: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                    k = if v <= *b { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_checked(&self, x: &[f64]) -> Result<usize, TreeError> {
        if x.len() != self.n {
            return Err(TreeError::Dimension { expected: self.n, got: x.len() });
        }
        Ok(self.predict(x))
    }

    /// Splits in depth-first order, as `(node index, hyperplane)`.
    pub fn splits(&self) -> Vec<(usize, Hyperplane)> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(k) = stack.pop() {
            if let Node::Split { a, b, left, right } = &self.nodes[k] {
                out.push((k, Hyperplane { a: a.clone(), b: *b }));
                stack.push(*right);
                stack.push(*left);
            }
        }
        out
    }

    pub fn root_split(&self) -> Option<Hyperplane> {
        match &self.nodes[self.root] {
            Node::Split { a, b, .. } => Some(Hyperplane { a: a.clone(), b: *b }),
            Node::Leaf { .. } => None,
        }
    }

    pub fn leaf_labels(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { leaf } => Some(*leaf),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Largest number of non-zero coefficients over all splits.
    pub fn max_split_nnz(&self) -> usize {
        self.splits().iter().map(|(_, h)| h.nnz()).max().unwrap_or(0)
    }

    fn node_depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(k) = stack.pop() {
            if let Node::Split { left, right, .. } = &self.nodes[k] {
                d[*left] = d[k] + 1;
                d[*right] = d[k] + 1;
                stack.push(*left);
                stack.push(*right);
            }
        }
        d
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |m: &str| Err(TreeError::Malformed(m.to_string()));
        if self.root >= self.nodes.len() {
            return bad("root index out of range");
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, 0usize)];
        let mut depth = 0;
        while let Some((k, d)) = stack.pop() {
            if seen[k] {
                return bad("node reachable twice");
            }
            seen[k] = true;
            depth = depth.max(d);
            if let Node::Split { a, b, left, right } = &self.nodes[k] {
                if a.len() != self.n || !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                    return bad("split has the wrong dimension or non-finite coefficients");
                }
                if *left >= self.nodes.len() || *right >= self.nodes.len() {
                    return bad("child index out of range");
                }
                stack.push((*left, d + 1));
                stack.push((*right, d + 1));
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("unreachable node");
        }
        if depth != self.depth {
            return bad("recorded depth does not match the tree");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, TreeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let tree: ObliqueTree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    /// Numbered splits with all coefficients, then leaves with their
    /// prioritized classes and control vectors.
    pub fn to_text(&self, book: &LabelBook) -> String {
        let mut out = String::new();
        let depths = self.node_depths();
        let _ = writeln!(out, "oblique tree: {} classes, depth {}, {} leaves", self.n, self.depth, self.num_leaves());
        for (no, (k, h)) in self.splits().iter().enumerate() {
            let terms: Vec<String> = h.a.iter().enumerate().map(|(i, v)| format!("{v:+.6} x_{}", i + 1)).collect();
            let (l, r) = match &self.nodes[*k] {
                Node::Split { left, right, .. } => (*left, *right),
                Node::Leaf { .. } => unreachable!(),
            };
            let _ = writeln!(
                out,
                "split {} (node {k}, depth {}): {} <= {:+.6} ? node {l} : node {r}",
                no + 1,
                depths[*k],
                terms.join(" "),
                h.b
            );
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if let Node::Leaf { leaf } = node {
                let _ = writeln!(out, "leaf node {k}: {}", describe_label(book, *leaf));
            }
        }
        out
    }

    pub fn to_dot(&self, book: &LabelBook) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box];\n");
        for (k, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { a, b, left, right } => {
                    let terms: Vec<String> = a
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(i, v)| format!("{v:+.3} x{}", i + 1))
                        .collect();
                    let _ = writeln!(out, "  n{k} [label=\"{} <= {b:.3}\"];", terms.join(" "));
                    let _ = writeln!(out, "  n{k} -> n{left} [label=\"yes\"];");
                    let _ = writeln!(out, "  n{k} -> n{right} [label=\"no\"];");
                }
                Node::Leaf { leaf } => {
                    let _ = writeln!(out, "  n{k} [shape=ellipse, label=\"{}\"];", describe_label(book, *leaf));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn describe_label(book: &LabelBook, id: usize) -> String {
    match book.control(id) {
        Some(u) => {
            let pri: Vec<String> = book.prioritized(id).iter().map(|i| i.to_string()).collect();
            let raw: Vec<String> = u.iter().map(|v| format!("{v}")).collect();
            format!("label {id} prioritize {{{}}} u = ({})", pri.join(","), raw.join(", "))
        }
        None => format!("label {id}"),
    }
}

/// `total * gini`
fn gini_mass(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    total as f64 - sq / total as f64
}

struct Node1<'a> {
    xs: Vec<&'a [f64]>,
    ys: Vec<usize>,
    num_labels: usize,
    min_leaf: usize,
}

impl Node1<'_> {
    fn len(&self) -> usize {
        self.ys.len()
    }

    fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_labels];
        for &y in &self.ys {
            c[y] += 1;
        }
        c
    }

    fn split_mass(&self, left: &[usize], nl: usize, total: &[usize]) -> f64 {
        let right: Vec<usize> = total.iter().zip(left).map(|(t, l)| t - l).collect();
        gini_mass(left, nl) + gini_mass(&right, self.len() - nl)
    }

    /// Best threshold on projections `z`; returns `(mass, b)`.
    fn best_threshold(&self, z: &[f64], total: &[usize]) -> Option<(f64, f64)> {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| z[p].total_cmp(&z[q]));
        let mut left = vec![0; self.num_labels];
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n.saturating_sub(1) {
            left[self.ys[order[i]]] += 1;
            let nl = i + 1;
            let (lo, hi) = (z[order[i]], z[order[i + 1]]);
            if nl < self.min_leaf || n - nl < self.min_leaf || !(lo < hi) {
                continue;
            }
            let mass = self.split_mass(&left, nl, total);
            if best.map_or(true, |(m, _)| mass < m - IMPROVE_TOL) {
                // a threshold through the origin keeps the split valid for scaled states
                let b = if lo < 0.0 && hi > 0.0 { 0.0 } else { 0.5 * (lo + hi) };
                best = Some((mass, b));
            }
        }
        best
    }

    fn project(&self, a: &[f64]) -> Vec<f64> {
        self.xs.iter().map(|x| a.iter().zip(*x).map(|(a, x)| a * x).sum()).collect()
    }

    fn mass_of(&self, a: &[f64], b: f64, total: &[usize]) -> Option<f64> {
        let z = self.project(a);
        let mut left = vec![0; self.num_labels];
        let mut nl = 0;
        for (i, &zi) in z.iter().enumerate() {
            if zi <= b {
                left[self.ys[i]] += 1;
                nl += 1;
            }
        }
        if nl < self.min_leaf || self.len() - nl < self.min_leaf {
            return None;
        }
        Some(self.split_mass(&left, nl, total))
    }

    /// Best value of `a_j` with the other coefficients and `b` fixed; returns `(mass, a_j)`.
    fn optimize_coord(&self, a: &[f64], b: f64, j: usize, total: &[usize]) -> Option<(f64, f64)> {
        let n = self.len();
        let mut left = vec![0; self.num_labels];
        let mut nl = 0;
        // (breakpoint, sample, moves_right)
        let mut events: Vec<(f64, usize, bool)> = Vec::new();
        for i in 0..n {
            let x = self.xs[i];
            let r: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - a[j] * x[j];
            if x[j] == 0.0 {
                if r <= b {
                    left[self.ys[i]] += 1;
                    nl += 1;
                }
                continue;
            }
            let u = (b - r) / x[j];
            if x[j] > 0.0 {
                // left while a_j <= u
                left[self.ys[i]] += 1;
                nl += 1;
                events.push((u, i, true));
            } else {
                events.push((u, i, false));
            }
        }
        if events.is_empty() {
            return None;
        }
        events.sort_by(|p, q| p.0.total_cmp(&q.0));
        let span = (events[events.len() - 1].0 - events[0].0).abs().max(1e-3);
        let mut best: Option<(f64, f64)> = None;
        let consider = |mass: f64, t: f64, nl: usize, best: &mut Option<(f64, f64)>| {
            if nl < self.min_leaf || n - nl < self.min_leaf {
                return;
            }
            let better = match *best {
                None => true,
                Some((m, bt)) => mass < m - IMPROVE_TOL || (mass <= m + IMPROVE_TOL && (t - a[j]).abs() < (bt - a[j]).abs()),
            };
            if better {
                *best = Some((mass, t));
            }
        };
        // before the first breakpoint
        consider(self.split_mass(&left, nl, total), events[0].0 - 0.5 * span, nl, &mut best);
        let mut k = 0;
        while k < events.len() {
            let u = events[k].0;
            while k < events.len() && events[k].0 == u {
                let (_, i, moves_right) = events[k];
                if moves_right {
                    left[self.ys[i]] -= 1;
                    nl -= 1;
                } else {
                    left[self.ys[i]] += 1;
                    nl += 1;
                }
                k += 1;
            }
            // counts now describe a_j strictly between u and the next breakpoint
            let t = if k < events.len() { 0.5 * (u + events[k].0) } else { u + 0.5 * span };
            consider(self.split_mass(&left, nl, total), t, nl, &mut best);
        }
        best
    }
}

struct Candidate {
    a: Vec<f64>,
    b: f64,
    mass: f64,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn axis_start(node: &Node1, total: &[usize], n: usize) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for j in 0..n {
        let z: Vec<f64> = node.xs.iter().map(|x| x[j]).collect();
        if let Some((mass, b)) = node.best_threshold(&z, total) {
            if best.as_ref().map_or(true, |c| mass < c.mass - IMPROVE_TOL) {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                best = Some(Candidate { a, b, mass });
            }
        }
    }
    best
}

fn centroid_direction(node: &Node1, total: &[usize], n: usize) -> Vec<f64> {
    let mut by_count: Vec<usize> = (0..node.num_labels).filter(|&l| total[l] > 0).collect();
    by_count.sort_by(|&p, &q| total[q].cmp(&total[p]).then(p.cmp(&q)));
    let mean = |label: usize| {
        let mut m = vec![0.0; n];
        for (x, &y) in node.xs.iter().zip(&node.ys) {
            if y == label {
                for j in 0..n {
                    m[j] += x[j];
                }
            }
        }
        m.iter().map(|v| v / total[label] as f64).collect::<Vec<_>>()
    };
    let (m0, m1) = (mean(by_count[0]), mean(by_count[1]));
    m0.iter().zip(&m1).map(|(p, q)| p - q).collect()
}

fn keep_largest(a: &mut [f64], k: usize) {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&p, &q| a[q].abs().total_cmp(&a[p].abs()).then(p.cmp(&q)));
    for &j in &order[k..] {
        a[j] = 0.0;
    }
}

fn rescale(c: &mut Candidate) {
    let norm = c.a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        c.a.iter_mut().for_each(|v| *v /= norm);
        c.b /= norm;
    }
}

fn local_search(node: &Node1, total: &[usize], mut c: Candidate, active: &mut Vec<usize>, cap: Option<usize>, iters: usize) -> Candidate {
    let n = c.a.len();
    let update_b = |c: &mut Candidate| {
        let z = node.project(&c.a);
        if let Some((mass, b)) = node.best_threshold(&z, total) {
            if mass < c.mass - IMPROVE_TOL {
                c.mass = mass;
                c.b = b;
            }
        }
    };
    if let Some(k) = cap {
        // greedy forward selection of coefficients
        while active.len() < k {
            let mut pick: Option<(usize, f64, f64)> = None;
            for j in (0..n).filter(|j| !active.contains(j)) {
                if let Some((mass, t)) = node.optimize_coord(&c.a, c.b, j, total) {
                    if mass < c.mass - IMPROVE_TOL && pick.map_or(true, |(_, m, _)| mass < m - IMPROVE_TOL) {
                        pick = Some((j, mass, t));
                    }
                }
            }
            let Some((j, mass, t)) = pick else { break };
            active.push(j);
            active.sort_unstable();
            c.a[j] = t;
            c.mass = mass;
            update_b(&mut c);
        }
    }
    for _ in 0..iters {
        let mut improved = false;
        for &j in active.iter() {
            if let Some((mass, t)) = node.optimize_coord(&c.a, c.b, j, total) {
                if mass < c.mass - IMPROVE_TOL {
                    c.a[j] = t;
                    c.mass = mass;
                    improved = true;
                    update_b(&mut c);
                }
            }
        }
        rescale(&mut c);
        if !improved {
            break;
        }
    }
    drop_small_coefficients(node, total, c)
}

/// Zeroes coefficients, smallest first, whenever that does not worsen the split.
/// Tiny coefficients fit to the training scale would otherwise change the
/// prediction for scaled states.
fn drop_small_coefficients(node: &Node1, total: &[usize], mut c: Candidate) -> Candidate {
    let mut order: Vec<usize> = (0..c.a.len()).filter(|&j| c.a[j] != 0.0).collect();
    order.sort_by(|&p, &q| c.a[p].abs().total_cmp(&c.a[q].abs()).then(p.cmp(&q)));
    for j in order {
        if c.a.iter().filter(|v| **v != 0.0).count() == 1 {
            break;
        }
        let mut a = c.a.clone();
        a[j] = 0.0;
        let z = node.project(&a);
        if let Some((mass, b)) = node.best_threshold(&z, total) {
            if mass <= c.mass + IMPROVE_TOL {
                c = Candidate { a, b, mass: mass.min(c.mass) };
            }
        }
    }
    c
}

fn run_restart(node: &Node1, total: &[usize], n: usize, cfg: &TrainConfig, r: usize, node_id: u64) -> Option<Candidate> {
    let cap = cfg.sparsity_k(n);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, node_id, r as u64));
    let axis = axis_start(node, total, n);
    let mut a = match r % 2 {
        0 => axis.as_ref().map(|c| c.a.clone()).unwrap_or_else(|| vec![1.0; n]),
        _ => centroid_direction(node, total, n),
    };
    if r >= 2 {
        let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in a.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += 0.5 * scale * z;
        }
    }
    if let Some(k) = cap {
        // sparse restarts start from their single largest coefficient and grow greedily
        keep_largest(&mut a, if r % 2 == 0 { 1 } else { k });
    }
    if a.iter().all(|v| *v == 0.0) {
        return axis;
    }
    let z = node.project(&a);
    let (mass, b) = node.best_threshold(&z, total)?;
    let mut active: Vec<usize> = match cap {
        Some(_) => (0..n).filter(|&j| a[j] != 0.0).collect(),
        None => (0..n).collect(),
    };
    Some(local_search(node, total, Candidate { a, b, mass }, &mut active, cap, cfg.coord_iters))
}

/// Best oblique split of the samples, with its weighted Gini decrease, or `None`
/// when no split decreases the impurity by more than `min_decrease` while
/// leaving `min_leaf` samples on each side.
pub fn best_split(xs: &[&[f64]], ys: &[usize], config: &TrainConfig) -> Option<(Hyperplane, f64)> {
    best_split_at(xs, ys, config, 0)
}

fn best_split_at(xs: &[&[f64]], ys: &[usize], config: &TrainConfig, node_id: u64) -> Option<(Hyperplane, f64)> {
    let n = xs.first()?.len();
    let num_labels = ys.iter().copied().max()? + 1;
    let node = Node1 { xs: xs.to_vec(), ys: ys.to_vec(), num_labels, min_leaf: config.min_leaf };
    let total = node.counts();
    if total.iter().filter(|&&c| c > 0).count() < 2 || node.len() < 2 * config.min_leaf {
        return None;
    }
    let parent = gini_mass(&total, node.len());
    let results: Vec<Option<Candidate>> =
        (0..config.restarts).into_par_iter().map(|r| run_restart(&node, &total, n, config, r, node_id)).collect();
    let mut best: Option<Candidate> = None;
    for c in results.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| c.mass < b.mass - IMPROVE_TOL) {
            best = Some(c);
        }
    }
    let best = best?;
    let plane = Hyperplane::normalized(best.a, best.b)?;
    // re-evaluate with the normalized plane, which fixes the final partition
    let mass = node.mass_of(&plane.a, plane.b, &total)?;
    let decrease = (parent - mass) / node.len() as f64;
    (decrease > config.min_decrease).then_some((plane, decrease))
}

fn majority(ys: &[usize]) -> usize {
    let num = ys.iter().copied().max().map_or(0, |m| m + 1);
    let mut c = vec![0usize; num];
    for &y in ys {
        c[y] += 1;
    }
    // ties go to the smallest id
    (0..num).max_by(|&p, &q| c[p].cmp(&c[q]).then(q.cmp(&p))).unwrap_or(0)
}

/// Grows a tree on `ds`. Deterministic for a given seed.
pub fn train(ds: &Dataset, config: &TrainConfig) -> Result<ObliqueTree, TreeError> {
    config.validate()?;
    if ds.is_empty() {
        return Err(TreeError::EmptyDataset);
    }
    let mut tree = ObliqueTree { n: ds.n(), nodes: Vec::new(), root: 0, depth: 0, config: config.clone() };
    let idx: Vec<usize> = (0..ds.len()).collect();
    grow(ds, config, &mut tree, idx, 0);
    tree.depth = tree.node_depths().into_iter().max().unwrap_or(0);
    Ok(tree)
}

fn grow(ds: &Dataset, cfg: &TrainConfig, tree: &mut ObliqueTree, idx: Vec<usize>, depth: usize) -> usize {
    let ys: Vec<usize> = idx.iter().map(|&i| ds.samples[i].label).collect();
    let me = tree.nodes.len();
    tree.nodes.push(Node::Leaf { leaf: majority(&ys) });
    let pure = ys.iter().all(|&y| y == ys[0]);
    if pure || depth >= cfg.max_depth {
        return me;
    }
    let xs: Vec<&[f64]> = idx.iter().map(|&i| ds.samples[i].x.as_slice()).collect();
    let Some((plane, _)) = best_split_at(&xs, &ys, cfg, me as u64) else {
        return me;
    };
    let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| plane.goes_left(&ds.samples[i].x));
    if li.len() < cfg.min_leaf || ri.len() < cfg.min_leaf {
        return me;
    }
    let left = grow(ds, cfg, tree, li, depth + 1);
    let right = grow(ds, cfg, tree, ri, depth + 1);
    tree.nodes[me] = Node::Split { a: plane.a, b: plane.b, left, right };
    me
}

/// Fraction of samples whose predicted label equals the stored one.
pub fn accuracy(tree: &ObliqueTree, ds: &Dataset) -> Result<f64, TreeError> {
    if ds.is_empty() {
        return Err(TreeError::EmptyDataset);
    }
    let mut hits = 0;
    for s in &ds.samples {
        if tree.predict_checked(&s.x)? == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Picks the depth from `config.depth_grid` with the best validation accuracy,
/// preferring the smaller depth on ties.
pub fn tune_depth(train_ds: &Dataset, valid_ds: &Dataset, config: &TrainConfig) -> Result<TrainConfig, TreeError> {
    config.validate()?;
    if train_ds.is_empty() || valid_ds.is_empty() {
        return Err(TreeError::EmptyDataset);
    }
    let mut grid = config.depth_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let mut best: Option<(f64, usize)> = None;
    for d in grid {
        let cfg = TrainConfig { max_depth: d, ..config.clone() };
        let acc = accuracy(&train(train_ds, &cfg)?, valid_ds)?;
        log::debug!("depth {d}: validation accuracy {acc:.4}");
        if best.map_or(true, |(a, _)| acc > a) {
            best = Some((acc, d));
        }
    }
    let (_, d) = best.expect("grid is non-empty");
    Ok(TrainConfig { max_depth: d, ..config.clone() })
}

/// `sum over leaves of (samples * gini)` on the training data, for the tree cut at `depth`.
pub fn impurity_at_depth(tree: &ObliqueTree, ds: &Dataset, depth: usize) -> f64 {
    let depths = tree.node_depths();
    let num = ds.samples.iter().map(|s| s.label).max().map_or(0, |m| m + 1);
    let mut counts: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for s in &ds.samples {
        let mut k = tree.root;
        while let Node::Split { a, b, left, right } = &tree.nodes[k] {
            if depths[k] >= depth {
                break;
            }
            let v: f64 = a.iter().zip(&s.x).map(|(a, x)| a * x).sum();
            k = if v <= *b { *left } else { *right };
        }
        counts.entry(k).or_insert_with(|| vec![0; num])[s.label] += 1;
    }
    counts.values().map(|c| gini_mass(c, c.iter().sum())).sum()
}
