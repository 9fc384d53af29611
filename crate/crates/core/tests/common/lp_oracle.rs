//! Brute-force reference for small bounded LPs: every basis, every bound
//! assignment of the nonbasic variables.

use fluidtree::lp::{CscMatrix, LpProblem, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves the dense square system `m x = rhs` by Gaussian elimination with
/// partial pivoting. Returns `None` when `m` is numerically singular.
pub fn dense_solve(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for c in 0..k {
        let p = (c..k).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-9 {
            return None;
        }
        m.swap(c, p);
        rhs.swap(c, p);
        for r in c + 1..k {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for j in c..k {
                    m[r][j] -= f * m[c][j];
                }
                rhs[r] -= f * rhs[c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        let s: f64 = (c + 1..k).map(|j| m[c][j] * x[j]).sum();
        x[c] = (rhs[c] - s) / m[c][c];
    }
    Some(x)
}

fn subsets(v: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, v: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for j in start..v {
            cur.push(j);
            rec(j + 1, v, r, cur, out);
            cur.pop();
        }
    }
    rec(0, v, r, &mut cur, &mut out);
    out
}

/// Minimum objective over all basic feasible solutions, or `None` if none exist.
/// Requires `a` to have full row rank.
pub fn best_vertex(a: &[Vec<f64>], b: &[f64], c: &[f64], lo: &[f64], up: &[f64]) -> Option<(f64, Vec<f64>)> {
    let r = b.len();
    let v = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for basis in subsets(v, r) {
        let nonbasic: Vec<usize> = (0..v).filter(|j| !basis.contains(j)).collect();
        let bm: Vec<Vec<f64>> = (0..r).map(|i| basis.iter().map(|&j| a[i][j]).collect()).collect();
        let choices: Vec<Vec<f64>> = nonbasic
            .iter()
            .map(|&j| {
                let mut opts = Vec::new();
                if lo[j].is_finite() {
                    opts.push(lo[j]);
                }
                if up[j].is_finite() && up[j] != lo[j] {
                    opts.push(up[j]);
                }
                if opts.is_empty() {
                    opts.push(0.0);
                }
                opts
            })
            .collect();
        let combos: usize = choices.iter().map(|o| o.len()).product();
        for mut code in 0..combos {
            let mut x = vec![0.0; v];
            for (k, &j) in nonbasic.iter().enumerate() {
                x[j] = choices[k][code % choices[k].len()];
                code /= choices[k].len();
            }
            let rhs: Vec<f64> = (0..r).map(|i| b[i] - nonbasic.iter().map(|&j| a[i][j] * x[j]).sum::<f64>()).collect();
            let Some(xb) = dense_solve(bm.clone(), rhs) else { break };
            for (k, &j) in basis.iter().enumerate() {
                x[j] = xb[k];
            }
            let ok = (0..v).all(|j| x[j] >= lo[j] - 1e-9 && x[j] <= up[j] + 1e-9);
            if ok {
                let obj: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
    }
    best
}

/// Reference status and optimal objective.
pub fn oracle(a: &[Vec<f64>], b: &[f64], c: &[f64], lo: &[f64], up: &[f64]) -> (LpStatus, Option<f64>) {
    let Some((obj, _)) = best_vertex(a, b, c, lo, up) else { return (LpStatus::Infeasible, None) };
    // recession direction with negative cost inside a unit box
    let v = c.len();
    let (dlo, dup): (Vec<f64>, Vec<f64>) = (0..v)
        .map(|j| match (lo[j].is_finite(), up[j].is_finite()) {
            (true, true) => (0.0, 0.0),
            (true, false) => (0.0, 1.0),
            (false, true) => (-1.0, 0.0),
            (false, false) => (-1.0, 1.0),
        })
        .unzip();
    let zero = vec![0.0; b.len()];
    let (ray, _) = best_vertex(a, &zero, c, &dlo, &dup).expect("d = 0 is always feasible");
    if ray < -1e-9 {
        (LpStatus::Unbounded, None)
    } else {
        (LpStatus::Optimal, Some(obj))
    }
}

pub struct DenseLp {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
}

impl DenseLp {
    pub fn to_problem(&self) -> LpProblem<f64> {
        LpProblem {
            cost: self.c.clone(),
            eq_matrix: CscMatrix::from_dense(&self.a),
            eq_rhs: self.b.clone(),
            lower: self.lo.clone(),
            upper: self.up.clone(),
        }
    }
}

fn full_row_rank(a: &[Vec<f64>]) -> bool {
    let r = a.len();
    if r == 0 {
        return true;
    }
    let v = a[0].len();
    subsets(v, r).into_iter().any(|s| {
        let m: Vec<Vec<f64>> = a.iter().map(|row| s.iter().map(|&j| row[j]).collect()).collect();
        dense_solve(m, vec![0.0; r]).is_some()
    })
}

/// Random LP with up to 8 variables and 4 rows. Mixes integer data (degenerate
/// vertices) with continuous data, and all four bound types.
pub fn random_lp(seed: u64) -> DenseLp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = rng.gen_range(2..=8);
        let r = rng.gen_range(1..=4.min(v));
        let integer = rng.gen_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if integer {
                rng.gen_range(-3..=3) as f64
            } else {
                rng.gen_range(-2.0..2.0)
            }
        };
        let a: Vec<Vec<f64>> = (0..r).map(|_| (0..v).map(|_| draw(&mut rng)).collect()).collect();
        if !full_row_rank(&a) {
            continue;
        }
        let c: Vec<f64> = (0..v).map(|_| draw(&mut rng)).collect();
        let mut lo = vec![0.0; v];
        let mut up = vec![f64::INFINITY; v];
        for j in 0..v {
            match rng.gen_range(0..10) {
                0..=4 => {}
                5..=7 => {
                    lo[j] = rng.gen_range(-2..=0) as f64;
                    up[j] = lo[j] + rng.gen_range(0..=3) as f64;
                }
                8 => {
                    lo[j] = f64::NEG_INFINITY;
                }
                _ => {
                    lo[j] = f64::NEG_INFINITY;
                    up[j] = rng.gen_range(-1..=2) as f64;
                }
            }
        }
        // mostly feasible right-hand sides, built from a point inside the bounds
        let b: Vec<f64> = if rng.gen_bool(0.8) {
            let xbar: Vec<f64> = (0..v)
                .map(|j| {
                    let l = if lo[j].is_finite() { lo[j] } else { up[j].min(0.0) - 2.0 };
                    let u = if up[j].is_finite() { up[j] } else { l + 3.0 };
                    if integer {
                        (l + (u - l) * rng.gen_range(0..=2) as f64 / 2.0).round().clamp(l, u)
                    } else {
                        rng.gen_range(l..=u)
                    }
                })
                .collect();
            a.iter().map(|row| row.iter().zip(&xbar).map(|(p, q)| p * q).sum()).collect()
        } else {
            (0..r).map(|_| draw(&mut rng)).collect()
        };
        return DenseLp { a, b, c, lo, up };
    }
}
