//! Solves `(G - 2γ A Aᵀ) x = b` for diagonal `G` through the Woodbury identity,
//!
//! ```text
//! x = G⁻¹b + 2γ G⁻¹A (I - 2γ AᵀG⁻¹A)⁻¹ AᵀG⁻¹ b
//! ```
//!
//! so only an m×m system is ever factorized. Factorization costs
//! O(n·nnz_row² + m³); each solve afterwards costs O(nnz(A) + m²).

use ndarray::{Array1, Array2, ArrayView1};

use super::dense::Lu;
use super::lowrank::{DiagonalMatrix, LowRankFactor};
use crate::error::{Error, Result};

/// A factorized `G - 2γ A Aᵀ`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct WoodburySolver<'a> {
    g_inv: Array1<f64>,
    factor: &'a LowRankFactor,
    g: Array1<f64>,
    two_gamma: f64,
    inner: Lu,
}

impl<'a> WoodburySolver<'a> {
    pub fn new(g: &DiagonalMatrix, factor: &'a LowRankFactor, gamma: f64) -> Result<Self> {
        let n = factor.nrows();
        if g.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "G has length {}, factor has {n} rows",
                g.len()
            )));
        }
        if !g.is_strictly_positive() {
            return Err(Error::InvalidParameter(
                "every diagonal entry of G must be finite and > 0".into(),
            ));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        let two_gamma = 2.0 * gamma;
        let g_inv = g.values().mapv(f64::recip);
        let gram = factor.weighted_gram(g_inv.as_slice().expect("contiguous"))?;
        let m = factor.ncols();
        let inner = Array2::from_shape_fn((m, m), |(p, q)| {
            let delta = if p == q { 1.0 } else { 0.0 };
            delta - two_gamma * gram[[p, q]]
        });
        let inner = Lu::factor(&inner).ok_or(Error::SingularInnerMatrix { size: m })?;
        Ok(Self {
            g_inv,
            factor,
            g: g.values().clone(),
            two_gamma,
            inner,
        })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn solve(&self, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
        if rhs.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has length {}, system has n = {}",
                rhs.len(),
                self.n()
            )));
        }
        let y = &rhs * &self.g_inv;
        let t = self.factor.t_matvec(y.as_slice().expect("contiguous"))?;
        let z = self.inner.solve(t.as_slice().expect("contiguous"));
        let u = self.factor.matvec(&z)?;
        let x = y + &(self.two_gamma * &(u * &self.g_inv));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularInnerMatrix {
                size: self.factor.ncols(),
            });
        }
        Ok(x)
    }

    /// `(G - 2γ A Aᵀ) x`, evaluated in O(nnz(A)).
    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let xs = x.to_vec();
        let t = self.factor.t_matvec(&xs)?;
        let u = self.factor.matvec(t.as_slice().expect("contiguous"))?;
        Ok(&x * &self.g - &(self.two_gamma * &u))
    }
}

/// One-shot `(G - 2γ A Aᵀ)⁻¹ rhs`. Prefer [`WoodburySolver`] for several
/// right-hand sides.
pub fn woodbury_solve(
    g: &DiagonalMatrix,
    factor: &LowRankFactor,
    gamma: f64,
    rhs: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    WoodburySolver::new(g, factor, gamma)?.solve(rhs)
}
