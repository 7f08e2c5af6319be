//! Dense lower-triangular Cholesky factors sized for model-space MCMC,
//! where the factored matrix is `k × k` with `k` rarely above a few hundred.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::dot;

/// Smallest pivot accepted when factoring or appending.
pub const PIVOT_TOL: f64 = 1e-10;

/// Lower-triangular `L` with `A = L Lᵀ`, stored row-major as a full square.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    dim: usize,
    data: Vec<f64>,
}

/// A pivot fell below [`PIVOT_TOL`] at the given row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PivotError(pub usize);

impl Cholesky {
    pub fn empty() -> Self {
        Cholesky { dim: 0, data: Vec::new() }
    }

    /// Factors a symmetric positive definite row-major matrix.
    pub fn factor(a: &[f64], dim: usize) -> Result<Self, PivotError> {
        assert_eq!(a.len(), dim * dim);
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let s = a[i * dim + j] - dot(&l[i * dim..i * dim + j], &l[j * dim..j * dim + j]);
                if i == j {
                    if s <= PIVOT_TOL {
                        return Err(PivotError(i));
                    }
                    l[i * dim + i] = s.sqrt();
                } else {
                    l[i * dim + j] = s / l[j * dim + j];
                }
            }
        }
        Ok(Cholesky { dim, data: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `log |A| = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).ln()).sum::<f64>() * 2.0
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x = b.to_vec();
        for i in 0..d {
            let row = &self.data[i * d..i * d + i];
            let s = dot(row, &x[..i]);
            x[i] = (x[i] - s) / self.data[i * d + i];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x = b.to_vec();
        for i in (0..d).rev() {
            let mut s = x[i];
            for t in i + 1..d {
                s -= self.data[t * d + i] * x[t];
            }
            x[i] = s / self.data[i * d + i];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// Grows the factor by one row and column: `cross` holds the new
    /// off-diagonal entries of `A`, `diag` the new diagonal entry.
    pub fn append(&mut self, cross: &[f64], diag: f64) -> Result<(), PivotError> {
        let d = self.dim;
        assert_eq!(cross.len(), d);
        let row = self.solve_lower(cross);
        let pivot = diag - row.iter().map(|v| v * v).sum::<f64>();
        if pivot <= PIVOT_TOL {
            return Err(PivotError(d));
        }
        let n = d + 1;
        let mut data = vec![0.0; n * n];
        for i in 0..d {
            data[i * n..i * n + d].copy_from_slice(&self.data[i * d..i * d + d]);
        }
        data[d * n..d * n + d].copy_from_slice(&row);
        data[d * n + d] = pivot.sqrt();
        self.dim = n;
        self.data = data;
        Ok(())
    }

    /// Drops row and column `m` of `A`. The trailing block absorbs the
    /// removed column through a rank-one update, which cannot lose
    /// positivity.
    pub fn remove(&mut self, m: usize) {
        let d = self.dim;
        assert!(m < d);
        let n = d - 1;
        let mut v: Vec<f64> = (m + 1..d).map(|i| self.get(i, m)).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..d {
            if i == m {
                continue;
            }
            let ni = if i > m { i - 1 } else { i };
            for j in 0..=i {
                if j == m {
                    continue;
                }
                let nj = if j > m { j - 1 } else { j };
                data[ni * n + nj] = self.get(i, j);
            }
        }
        // Rank-one update of the trailing (d-m-1) block, which starts at m.
        let t = n - m;
        for j in 0..t {
            let jj = (m + j) * n + (m + j);
            let ljj = data[jj];
            let r = ljj.hypot(v[j]);
            let c = r / ljj;
            let s = v[j] / ljj;
            data[jj] = r;
            for i in j + 1..t {
                let ij = (m + i) * n + (m + j);
                data[ij] = (data[ij] + s * v[i]) / c;
                v[i] = c * v[i] - s * data[ij];
            }
        }
        self.dim = n;
        self.data = data;
    }

    /// Reconstructs `A = L Lᵀ` (row-major). Test and diagnostic helper.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let kmax = i.min(j);
                a[i * d + j] = (0..=kmax).map(|t| self.get(i, t) * self.get(j, t)).sum();
            }
        }
        a
    }
}
