//! Dense pairwise similarities for the kernel baseline and the standard
//! graph Laplacian `L = D - W`.
//!
//! Two members of the Matérn family are provided: the exponential kernel
//! (ν = 1/2) and the Gaussian RBF kernel (ν → ∞).

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseSymmetric;

/// Largest point count for which an n×n similarity is built.
pub const DENSE_MAX_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `σ² exp(-h² / 2ℓ²)`
    GaussianRbf,
    /// `σ² exp(-h / ℓ)`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub length_scale: f64,
    #[serde(default = "unit_variance")]
    pub variance: f64,
}

fn unit_variance() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn gaussian(length_scale: f64) -> Self {
        Self {
            family: KernelFamily::GaussianRbf,
            length_scale,
            variance: 1.0,
        }
    }

    pub fn exponential(length_scale: f64) -> Self {
        Self {
            family: KernelFamily::Exponential,
            length_scale,
            variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel length scale must be > 0, got {}",
                self.length_scale
            )));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel variance must be > 0, got {}",
                self.variance
            )));
        }
        Ok(())
    }

    /// Kernel value from a squared Euclidean distance.
    #[inline]
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        match self.family {
            KernelFamily::GaussianRbf => {
                self.variance * (-sq_dist / (2.0 * self.length_scale * self.length_scale)).exp()
            }
            KernelFamily::Exponential => self.variance * (-sq_dist.sqrt() / self.length_scale).exp(),
        }
    }
}

pub(crate) fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    match x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((row, col), _)) => Err(Error::NonFiniteFeature { row, col }),
        None => Ok(()),
    }
}

/// `W[i,j] = k(x_i, x_j)` over the rows of `x`, diagonal included.
pub fn similarity_matrix(x: ArrayView2<f64>, spec: &KernelSpec) -> Result<DenseSymmetric> {
    spec.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::TooFewPoints("similarity needs at least one point".into()));
    }
    if n > DENSE_MAX_POINTS {
        return Err(Error::DenseMemoryGuard {
            n,
            limit: DENSE_MAX_POINTS,
        });
    }
    check_finite(x)?;
    let x = x.as_standard_layout();
    let d = x.ncols();
    let flat = x.as_slice().expect("standard layout");
    Ok(DenseSymmetric::from_upper_fn(n, |i, j| {
        let (xi, xj) = (&flat[i * d..(i + 1) * d], &flat[j * d..(j + 1) * d]);
        let sq: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
        spec.eval_sq_dist(sq)
    }))
}

/// `L = D - W` with `D_ii = Σ_j W_ij`.
pub fn graph_laplacian(w: &DenseSymmetric) -> Result<DenseSymmetric> {
    let wa = w.as_array();
    if let Some(((row, col), &v)) = wa.indexed_iter().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "similarity entry ({row}, {col}) = {v} is negative or NaN"
        )));
    }
    let degree = w.row_sums();
    let n = w.n();
    Ok(DenseSymmetric::from_upper_fn(n, |i, j| {
        if i == j {
            degree[i] - wa[[i, i]]
        } else {
            -wa[[i, j]]
        }
    }))
}
