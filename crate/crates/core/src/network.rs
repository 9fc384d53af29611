//! Multiclass fluid queueing network instances.
//!
//! A network has `n` job classes served by `m` servers. Class `i` is served
//! at rate `mu[i]` by server `server_of[i]`, receives external arrivals at rate
//! `lambda[i]`, costs `c[i]` per unit of fluid per unit time, and after service
//! either leaves the network or turns into class `successor[i]`. The fluid
//! dynamics are `x' = A u + lambda` subject to `D u <= 1`, `u, x >= 0`.
//!
//! Indices are 0-based in the API and 1-based in the JSON file format.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::DenseLu;
use crate::scalar::Scalar;

/// Condition number above which the flow matrix is treated as singular.
pub const MAX_FLOW_CONDITION: f64 = 1e12;

/// Service rates of the seven-server reentrant instance, rounded to three decimals.
pub const REENTRANT_M7_MU: [f64; 21] = [
    0.143, 0.253, 0.002, 0.287, 0.169, 0.278, 0.22, 0.11, 0.207, 0.216, 0.299, 0.004, 0.185, 0.205, 0.25, 0.268,
    0.027, 0.028, 0.245, 0.168, 0.248,
];

/// Holding costs of the seven-server reentrant instance, rounded to three decimals.
pub const REENTRANT_M7_C: [f64; 21] = [
    0.705, 0.235, 0.972, 0.968, 0.719, 0.107, 1.484, 1.395, 0.493, 0.746, 1.584, 1.512, 0.07, 0.892, 1.255, 0.305,
    1.941, 1.496, 0.643, 1.021, 1.975,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("flow matrix is singular (condition estimate {condition:.3e})")]
    SingularFlowMatrix { condition: f64 },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, NetworkError> {
    Err(NetworkError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec<T> {
    m: usize,
    mu: Vec<T>,
    lambda: Vec<T>,
    c: Vec<T>,
    successor: Vec<Option<usize>>,
    server_of: Vec<usize>,
}

impl<T: Scalar> NetworkSpec<T> {
    /// Builds and validates a network. `successor[i] = None` means class `i` exits.
    pub fn new(
        m: usize,
        mu: Vec<T>,
        lambda: Vec<T>,
        c: Vec<T>,
        successor: Vec<Option<usize>>,
        server_of: Vec<usize>,
    ) -> Result<Self, NetworkError> {
        let spec = NetworkSpec { m, mu, lambda, c, successor, server_of };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn successor(&self, class: usize) -> Option<usize> {
        self.successor[class]
    }

    pub fn server_of(&self, class: usize) -> usize {
        self.server_of[class]
    }

    /// Classes served by `server`, in increasing order.
    pub fn classes_of(&self, server: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.server_of[i] == server).collect()
    }

    /// Copy of the network with different external arrival rates.
    pub fn with_lambda(&self, lambda: Vec<T>) -> Result<Self, NetworkError> {
        NetworkSpec::new(self.m, self.mu.clone(), lambda, self.c.clone(), self.successor.clone(), self.server_of.clone())
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let n = self.n();
        if n == 0 || self.m == 0 {
            return invalid("network needs at least one class and one server");
        }
        if self.lambda.len() != n || self.c.len() != n || self.successor.len() != n || self.server_of.len() != n {
            return invalid(format!("all per-class vectors must have length n = {n}"));
        }
        for i in 0..n {
            if !(self.mu[i] > T::zero()) || !self.mu[i].is_finite() {
                return invalid(format!("service rate of class {} must be positive", i + 1));
            }
            if !(self.lambda[i] >= T::zero()) || !self.lambda[i].is_finite() {
                return invalid(format!("arrival rate of class {} must be non-negative", i + 1));
            }
            if !(self.c[i] > T::zero()) || !self.c[i].is_finite() {
                return invalid(format!("holding cost of class {} must be positive", i + 1));
            }
            if let Some(j) = self.successor[i] {
                if j >= n || j == i {
                    return invalid(format!("class {} has an invalid successor", i + 1));
                }
            }
            if self.server_of[i] >= self.m {
                return invalid(format!("class {} is assigned to a nonexistent server", i + 1));
            }
        }
        for s in 0..self.m {
            if !self.server_of.contains(&s) {
                return invalid(format!("server {} has no classes", s + 1));
            }
        }
        build_matrices(self).map(|_| ())
    }
}

/// `A` with `a_ii = -mu_i` and `a_ji = mu_i` when class `i` turns into class `j`.
#[derive(Debug, Clone)]
pub struct FlowMatrix<T> {
    a: Vec<Vec<T>>,
    lu: DenseLu<T>,
}

impl<T: Scalar> FlowMatrix<T> {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i][j]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.a
    }

    /// `A u`
    pub fn mul_vec(&self, u: &[T]) -> Vec<T> {
        self.a.iter().map(|row| row.iter().zip(u).map(|(&p, &q)| p * q).sum()).collect()
    }

    /// `y^T A`
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        let n = self.n();
        (0..n).map(|j| (0..n).map(|i| y[i] * self.a[i][j]).sum()).collect()
    }

    /// Solves `A z = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.lu.solve(b)
    }

    /// Solves `A^T z = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        self.lu.solve_transpose(b)
    }
}

/// `D` with `d_ji = 1` exactly when class `i` is served by server `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstituencyMatrix {
    m: usize,
    server_of: Vec<usize>,
}

impl ConstituencyMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.server_of.len()
    }

    pub fn get(&self, j: usize, i: usize) -> u8 {
        u8::from(self.server_of[i] == j)
    }

    pub fn server_of(&self, i: usize) -> usize {
        self.server_of[i]
    }

    /// `D u`: total effort per server.
    pub fn mul_vec<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.m];
        for (i, &s) in self.server_of.iter().enumerate() {
            out[s] += u[i];
        }
        out
    }

    pub fn to_dense<T: Scalar>(&self) -> Vec<Vec<T>> {
        (0..self.m).map(|j| (0..self.n()).map(|i| T::lit(self.get(j, i) as f64)).collect()).collect()
    }
}

pub fn build_matrices<T: Scalar>(spec: &NetworkSpec<T>) -> Result<(FlowMatrix<T>, ConstituencyMatrix), NetworkError> {
    let n = spec.n();
    let mut a = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        a[i][i] = -spec.mu[i];
        if let Some(j) = spec.successor[i] {
            a[j][i] = spec.mu[i];
        }
    }
    let lu = DenseLu::new(&a);
    let condition = lu.condition_1(&a).as_f64();
    if !(condition <= MAX_FLOW_CONDITION) {
        return Err(NetworkError::SingularFlowMatrix { condition });
    }
    Ok((FlowMatrix { a, lu }, ConstituencyMatrix { m: spec.m, server_of: spec.server_of.clone() }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload<T> {
    pub rho: Vec<T>,
    /// False when some server has `rho_j >= 1`.
    pub stable: bool,
}

/// `rho = -D A^{-1} lambda`, the long-run fraction of time each server must work.
pub fn workload<T: Scalar>(spec: &NetworkSpec<T>) -> Result<Workload<T>, NetworkError> {
    let (a, d) = build_matrices(spec)?;
    let neg_lambda: Vec<T> = spec.lambda.iter().map(|&l| -l).collect();
    let z = a.solve(&neg_lambda);
    let rho = d.mul_vec(&z);
    let stable = rho.iter().all(|&r| r < T::one());
    if !stable {
        log::warn!("network is not stable: workload {:?}", rho.iter().map(|r| r.as_f64()).collect::<Vec<_>>());
    }
    Ok(Workload { rho, stable })
}

/// Two servers, three classes: classes 1 and 2 share server 1, class 1 feeds
/// class 3 on server 2, classes 2 and 3 exit.
pub fn make_crisscross<T: Scalar>(mu: [T; 3], lambda1: T, lambda2: T, c: [T; 3]) -> Result<NetworkSpec<T>, NetworkError> {
    NetworkSpec::new(
        2,
        mu.to_vec(),
        vec![lambda1, lambda2, T::zero()],
        c.to_vec(),
        vec![Some(2), None, None],
        vec![0, 0, 1],
    )
}

/// Two servers, four classes on two routes 1 -> 2 and 3 -> 4; server 1 serves
/// classes 1 and 4, server 2 serves classes 2 and 3.
pub fn make_rybko_stolyar<T: Scalar>(mu: [T; 4], lambda1: T, lambda3: T, c: [T; 4]) -> Result<NetworkSpec<T>, NetworkError> {
    NetworkSpec::new(
        2,
        mu.to_vec(),
        vec![lambda1, T::zero(), lambda3, T::zero()],
        c.to_vec(),
        vec![Some(1), None, Some(3), None],
        vec![0, 1, 1, 0],
    )
}

/// Reentrant line with `m` servers and `3m` classes. Jobs arrive to class 1,
/// visit servers `1..m` as classes `1, 4, 7, ...`, return to server 1 as class 2
/// and pass the servers again as `2, 5, 8, ...`, then a third time as
/// `3, 6, 9, ...` and exit after class `3m`.
pub fn make_reentrant<T: Scalar>(m: usize, mu: Vec<T>, lambda1: T, c: Vec<T>) -> Result<NetworkSpec<T>, NetworkError> {
    if m == 0 {
        return invalid("reentrant network needs at least one server");
    }
    let n = 3 * m;
    if mu.len() != n || c.len() != n {
        return invalid(format!("reentrant network with {m} servers needs {n} rates and costs"));
    }
    let successor = (0..n)
        .map(|i| {
            if i + 3 < n {
                Some(i + 3)
            } else {
                match i % 3 {
                    0 => Some(1),
                    1 => Some(2),
                    _ => None,
                }
            }
        })
        .collect();
    let server_of = (0..n).map(|i| i / 3).collect();
    let mut lambda = vec![T::zero(); n];
    lambda[0] = lambda1;
    NetworkSpec::new(m, mu, lambda, c, successor, server_of)
}

/// Criss-cross instance with a switching line at `x_1 = 6 x_3`: the class
/// leaving after server 1 is served at rate 1, the class routed to server 2 at
/// rate 1.5 and then at rate 2 downstream, `lambda = (0.5, 0.5, 0)`, unit costs.
pub fn standard_crisscross() -> NetworkSpec<f64> {
    make_crisscross([1.5, 1.0, 2.0], 0.5, 0.5, [1.0; 3]).expect("constant instance is valid")
}

/// Rybko-Stolyar instance with `mu = (6, 1.5, 6, 1.5)`, unit arrivals to
/// classes 1 and 3, unit costs.
pub fn standard_rybko_stolyar() -> NetworkSpec<f64> {
    make_rybko_stolyar([6.0, 1.5, 6.0, 1.5], 1.0, 1.0, [1.0; 4]).expect("constant instance is valid")
}

/// Random reentrant instance: rates uniform on `[0.5, 2.5]`, costs uniform on
/// `[0.1, 2]`, and the arrival rate chosen so the busiest server has workload `load`.
pub fn random_reentrant<T: Scalar, R: Rng + ?Sized>(m: usize, load: f64, rng: &mut R) -> Result<NetworkSpec<T>, NetworkError> {
    if !(load > 0.0 && load < 1.0) {
        return invalid("target load must lie in (0, 1)");
    }
    let n = 3 * m;
    let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.5)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    // every job visits each class once, so a unit arrival rate loads server j by sum 1/mu
    let per_unit = (0..m).map(|s| (0..3).map(|r| 1.0 / mu[3 * s + r]).sum::<f64>()).fold(0.0, f64::max);
    let lambda1 = load / per_unit;
    make_reentrant(m, mu.into_iter().map(T::lit).collect(), T::lit(lambda1), c.into_iter().map(T::lit).collect())
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ExitTag {
    Exit,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SuccessorRepr {
    Class(usize),
    Exit(ExitTag),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    n: usize,
    m: usize,
    mu: Vec<f64>,
    lambda: Vec<f64>,
    c: Vec<f64>,
    successor: Vec<SuccessorRepr>,
    server_of: Vec<usize>,
}

impl<T: Scalar> Serialize for NetworkSpec<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        SpecFile {
            n: self.n(),
            m: self.m,
            mu: f(&self.mu),
            lambda: f(&self.lambda),
            c: f(&self.c),
            successor: self
                .successor
                .iter()
                .map(|s| match s {
                    Some(j) => SuccessorRepr::Class(j + 1),
                    None => SuccessorRepr::Exit(ExitTag::Exit),
                })
                .collect(),
            server_of: self.server_of.iter().map(|s| s + 1).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for NetworkSpec<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let file = SpecFile::deserialize(deserializer)?;
        if file.mu.len() != file.n {
            return Err(D::Error::custom(format!("n = {} but mu has {} entries", file.n, file.mu.len())));
        }
        let successor = file
            .successor
            .into_iter()
            .map(|s| match s {
                SuccessorRepr::Class(0) => Err(D::Error::custom("class indices are 1-based")),
                SuccessorRepr::Class(j) => Ok(Some(j - 1)),
                SuccessorRepr::Exit(_) => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let server_of = file
            .server_of
            .into_iter()
            .map(|s| s.checked_sub(1).ok_or_else(|| D::Error::custom("server indices are 1-based")))
            .collect::<Result<Vec<_>, _>>()?;
        let conv = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
        NetworkSpec::new(file.m, conv(file.mu), conv(file.lambda), conv(file.c), successor, server_of)
            .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn crisscross() -> NetworkSpec<f64> {
        make_crisscross([1.5, 2.0, 1.0], 0.5, 0.5, [1.0; 3]).unwrap()
    }

    #[test]
    fn crisscross_matrices() {
        let (a, d) = build_matrices(&crisscross()).unwrap();
        assert_eq!(a.rows(), &[vec![-1.5, 0.0, 0.0], vec![0.0, -2.0, 0.0], vec![1.5, 0.0, -1.0]]);
        assert_eq!(d.to_dense::<f64>(), vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn single_class() {
        let spec = NetworkSpec::new(1, vec![1.0], vec![0.0], vec![1.0], vec![None], vec![0]).unwrap();
        let (a, d) = build_matrices(&spec).unwrap();
        assert_eq!(a.rows(), &[vec![-1.0]]);
        assert_eq!(d.to_dense::<f64>(), vec![vec![1.0]]);
        assert_eq!(workload(&spec).unwrap().rho, vec![0.0]);
    }

    #[test]
    fn rybko_stolyar_matrices() {
        let spec = make_rybko_stolyar([6.0, 1.5, 6.0, 1.5], 1.0, 1.0, [1.0; 4]).unwrap();
        let (a, d) = build_matrices(&spec).unwrap();
        assert_eq!(a.get(1, 0), 6.0);
        assert_eq!(a.get(3, 2), 6.0);
        assert_eq!((0..4).map(|i| a.get(i, i)).collect::<Vec<_>>(), vec![-6.0, -1.5, -6.0, -1.5]);
        assert_eq!(d.to_dense::<f64>(), vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]]);
    }

    #[test]
    fn routing_cycle_is_rejected() {
        let err = NetworkSpec::new(1, vec![1.0, 1.0], vec![0.0; 2], vec![1.0; 2], vec![Some(1), Some(0)], vec![0, 0]);
        assert!(matches!(err, Err(NetworkError::SingularFlowMatrix { .. })));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(NetworkSpec::new(2, vec![1.0], vec![0.0], vec![1.0], vec![None], vec![0]).is_err());
        assert!(NetworkSpec::new(1, vec![0.0], vec![0.0], vec![1.0], vec![None], vec![0]).is_err());
        assert!(NetworkSpec::new(1, vec![1.0], vec![0.0], vec![1.0], vec![Some(0)], vec![0]).is_err());
    }

    #[test]
    fn reentrant_structure() {
        let spec = make_reentrant(1, vec![1.0; 3], 0.1, vec![1.0; 3]).unwrap();
        assert_eq!((0..3).map(|i| spec.successor(i)).collect::<Vec<_>>(), vec![Some(1), Some(2), None]);
        let spec = make_reentrant(7, REENTRANT_M7_MU.to_vec(), 1e-4, REENTRANT_M7_C.to_vec()).unwrap();
        assert_eq!((0..21).filter(|&i| spec.successor(i).is_none()).collect::<Vec<_>>(), vec![20]);
        assert_eq!(spec.successor(18), Some(1));
        assert_eq!(spec.successor(19), Some(2));
        let (_, d) = build_matrices(&spec).unwrap();
        let dense = d.to_dense::<f64>();
        assert!(dense.iter().all(|row| row.iter().sum::<f64>() == 3.0));
    }

    #[test]
    fn random_reentrant_hits_target_load() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let spec: NetworkSpec<f64> = random_reentrant(3, 0.8, &mut rng).unwrap();
        let rho = workload(&spec).unwrap().rho;
        let max = rho.iter().cloned().fold(0.0, f64::max);
        assert!((max - 0.8).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_uses_one_based_indices() {
        let spec = crisscross();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#""successor":[3,"exit","exit"]"#));
        assert!(text.contains(r#""server_of":[1,1,2]"#));
        let back: NetworkSpec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
