//! Dense symmetric factorizations used for Gram matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite
/// matrix, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes the row-major `n × n` matrix `a`. Fails on the first
    /// non-positive pivot, reporting its index.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n × n");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::NotPositiveDefinite {
                            index: i,
                            pivot: sum,
                        });
                    }
                    l[i * n + i] = libm::sqrt(sum);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `out = L · z`.
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i + 1];
            out[i] = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }
}

/// Numerical rank of a symmetric positive semidefinite matrix by Cholesky
/// with full diagonal pivoting.
///
/// Elimination stops once every remaining pivot is at most
/// `tol · max(1, max diagonal)`; a remaining pivot below the negative of
/// that threshold means the matrix is indefinite and is reported as an
/// error naming the offending (original) index.
pub fn psd_rank(a: &[f64], n: usize, tol: f64) -> Result<usize> {
    assert_eq!(a.len(), n * n, "matrix must be n × n");
    let mut w = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(1.0, f64::max);
    let threshold = tol * scale;
    for k in 0..n {
        let (p, &pivot) = (k..n)
            .map(|i| (i, &w[perm[i] * n + perm[i]]))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty range");
        if pivot <= threshold {
            if let Some(i) = (k..n).find(|&i| w[perm[i] * n + perm[i]] < -threshold) {
                return Err(Error::NotPositiveDefinite {
                    index: perm[i],
                    pivot: w[perm[i] * n + perm[i]],
                });
            }
            return Ok(k);
        }
        perm.swap(k, p);
        let pk = perm[k];
        let root = libm::sqrt(pivot);
        for &pi in &perm[k + 1..] {
            w[pi * n + pk] /= root;
        }
        for a_i in k + 1..n {
            let pi = perm[a_i];
            let lik = w[pi * n + pk];
            for a_j in k + 1..=a_i {
                let pj = perm[a_j];
                let v = w[pi * n + pj] - lik * w[pj * n + pk];
                w[pi * n + pj] = v;
                w[pj * n + pi] = v;
            }
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let c = Cholesky::new(&a, 3).unwrap();
        let l = c.lower();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-14);
            }
        }
        let mut out = [0.0; 3];
        c.mul_lower(&[1.0, 0.0, 0.0], &mut out);
        assert_eq!(out[0], 2.0);
    }

    #[test]
    fn reports_offending_pivot() {
        let a = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            Cholesky::new(&a, 2),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn rank_of_semidefinite_and_indefinite() {
        // v vᵀ with v = (1, 2, 3): rank one.
        let v = [1.0, 2.0, 3.0];
        let a: Vec<f64> = (0..9).map(|k| v[k / 3] * v[k % 3]).collect();
        assert_eq!(psd_rank(&a, 3, 1e-10).unwrap(), 1);
        let id = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(psd_rank(&id, 2, 1e-10).unwrap(), 2);
        let indefinite = [1.0, 0.0, 0.0, -1.0];
        assert!(psd_rank(&indefinite, 2, 1e-10).is_err());
    }
}
