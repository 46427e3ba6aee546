//! Dense symmetric matrices and direct factorizations.
//!
//! Only the dense baseline and the small m×m Woodbury core go through here.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::par;

/// Absolute per-entry tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Row-parallel work is only dispatched when a column step touches at least
/// this many multiply-adds.
const PAR_WORK_THRESHOLD: usize = 1 << 15;

/// A square matrix known to be symmetric within [`SYMMETRY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    entries: Array2<f64>,
}

impl DenseSymmetric {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {rows}x{cols}"
            )));
        }
        for i in 0..rows {
            for j in (i + 1)..rows {
                let diff = (entries[[i, j]] - entries[[j, i]]).abs();
                // NaN compares false, so test the negation.
                if !(diff <= SYMMETRY_TOL) {
                    return Err(Error::AsymmetricInput {
                        row: i,
                        col: j,
                        diff,
                    });
                }
            }
        }
        Ok(Self {
            entries: entries.as_standard_layout().into_owned(),
        })
    }

    /// Builds `M[i,j] = f(i,j)` for `i <= j` and mirrors the upper triangle,
    /// so the result is exactly symmetric. Rows are filled in parallel.
    pub fn from_upper_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let mut data = vec![0.0; n * n];
        par::for_each_row_mut(&mut data, n, |i, row| {
            for (j, v) in row.iter_mut().enumerate().skip(i) {
                *v = f(i, j);
            }
        });
        for i in 0..n {
            for j in 0..i {
                data[i * n + j] = data[j * n + i];
            }
        }
        Self {
            entries: Array2::from_shape_vec((n, n), data).expect("n*n buffer"),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: Array2::eye(n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.entries
    }

    pub fn matvec(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.entries.dot(&x)
    }

    /// Row sums, i.e. the degree vector when the matrix is a similarity.
    pub fn row_sums(&self) -> Array1<f64> {
        Array1::from(par::map_range(self.n(), |i| self.entries.row(i).sum()))
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &DenseSymmetric) -> Result<Self> {
        let n = m.n();
        let mut lower = m
            .as_array()
            .as_slice()
            .expect("DenseSymmetric is kept in standard layout")
            .to_vec();

        for j in 0..n {
            let (head, tail) = lower.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..];
            let prefix_sq: f64 = row_j[..j].iter().map(|v| v * v).sum();
            let pivot = row_j[j] - prefix_sq;
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { row: j, pivot });
            }
            let diag = pivot.sqrt();
            row_j[j] = diag;
            for v in &mut row_j[j + 1..] {
                *v = 0.0;
            }
            let row_j: &[f64] = row_j;

            let update = |_: usize, row_i: &mut [f64]| {
                let dot: f64 = row_i[..j].iter().zip(&row_j[..j]).map(|(a, b)| a * b).sum();
                row_i[j] = (row_i[j] - dot) / diag;
            };
            let remaining = n - j - 1;
            if remaining * j >= PAR_WORK_THRESHOLD {
                par::for_each_row_mut(tail, n, update);
            } else {
                tail.chunks_mut(n).enumerate().for_each(|(i, r)| update(i, r));
            }
        }
        Ok(Self { n, lower })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs has length {}, matrix is {n}x{n}",
                rhs.len()
            )));
        }
        let l = &self.lower;
        // L y = b
        let mut y = rhs.to_vec();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let dot: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / l[i * n + i];
        }
        // Lᵀ x = y, column-oriented so rows of L are read contiguously.
        for i in (0..n).rev() {
            let xi = y[i] / l[i * n + i];
            y[i] = xi;
            let row = &l[i * n..i * n + i];
            for (yk, lik) in y[..i].iter_mut().zip(row) {
                *yk -= lik * xi;
            }
        }
        Ok(Array1::from(y))
    }
}

/// Solves `M x = rhs` for symmetric positive definite `M`.
pub fn dense_solve(m: &DenseSymmetric, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
    Cholesky::factor(m)?.solve(rhs)
}

/// LU factorization with partial (row) pivoting: `P M = L U`.
///
/// Used for the m×m Woodbury core, which is symmetric but may be indefinite.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    /// Unit-lower `L` below the diagonal, `U` on and above it.
    packed: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Returns `None` when a pivot vanishes relative to the matrix scale.
    pub fn factor(m: &Array2<f64>) -> Option<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "LU needs a square matrix");
        let mut a = m.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
        let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if !scale.is_finite() {
            return None;
        }
        let tiny = scale * f64::EPSILON * (n.max(1) as f64);
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > tiny) {
                return None;
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            let (upper, lower) = a.split_at_mut((k + 1) * n);
            let row_k = &upper[k * n..];
            for row_i in lower.chunks_mut(n) {
                let factor = row_i[k] / pivot;
                row_i[k] = factor;
                if factor != 0.0 {
                    for (x, u) in row_i[k + 1..].iter_mut().zip(&row_k[k + 1..]) {
                        *x -= factor * u;
                    }
                }
            }
        }
        Some(Self { n, packed: a, perm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let a = &self.packed;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let dot: f64 = a[i * n..i * n + i].iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= dot;
        }
        for i in (0..n).rev() {
            let dot: f64 = a[i * n + i + 1..(i + 1) * n]
                .iter()
                .zip(&x[i + 1..])
                .map(|(u, v)| u * v)
                .sum();
            x[i] = (x[i] - dot) / a[i * n + i];
        }
        x
    }
}
