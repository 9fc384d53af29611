//! Small dense linear algebra for network matrices (n is at most a few dozen).

use crate::scalar::Scalar;

/// LU factorization with partial pivoting of a square row-major matrix.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    lu: Vec<Vec<T>>,
    perm: Vec<usize>,
    singular: bool,
}

impl<T: Scalar> DenseLu<T> {
    pub fn new(a: &[Vec<T>]) -> Self {
        let n = a.len();
        let mut lu: Vec<Vec<T>> = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if lu[i][k].abs() > lu[p][k].abs() {
                    p = i;
                }
            }
            if lu[p][k] == T::zero() {
                singular = true;
                continue;
            }
            lu.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = lu[k][j];
                        lu[i][j] -= f * v;
                    }
                }
            }
        }
        DenseLu { lu, perm, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.len();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = self.lu[i][j] * x[j];
                x[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = self.lu[i][j] * x[j];
                x[i] -= v;
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.len();
        let mut z = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                let v = self.lu[j][i] * z[j];
                z[i] -= v;
            }
            z[i] /= self.lu[i][i];
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = self.lu[j][i] * z[j];
                z[i] -= v;
            }
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    /// 1-norm condition number computed from the explicit inverse.
    pub fn condition_1(&self, a: &[Vec<T>]) -> T {
        if self.singular {
            return T::infinity();
        }
        let n = a.len();
        let norm = |cols: &dyn Fn(usize) -> Vec<T>| -> T {
            (0..n).map(|j| cols(j).iter().map(|v| v.abs()).sum::<T>()).fold(T::zero(), T::max)
        };
        let a_norm = norm(&|j| a.iter().map(|row| row[j]).collect());
        let inv_norm = norm(&|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            self.solve(&e)
        });
        a_norm * inv_norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_transposes() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let lu = DenseLu::new(&a);
        let x = lu.solve(&[5.0, 3.0, 6.0]);
        for (i, row) in a.iter().enumerate() {
            let lhs: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((lhs - [5.0, 3.0, 6.0][i]).abs() < 1e-12);
        }
        let y = lu.solve_transpose(&[1.0, 2.0, 3.0]);
        for j in 0..3 {
            let lhs: f64 = (0..3).map(|i| a[i][j] * y[i]).sum();
            assert!((lhs - [1.0, 2.0, 3.0][j]).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_of_identity_and_singular() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(DenseLu::new(&id).condition_1(&id), 1.0);
        let s = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let lu = DenseLu::new(&s);
        assert!(lu.is_singular() || lu.condition_1(&s) > 1e12);
    }
}
