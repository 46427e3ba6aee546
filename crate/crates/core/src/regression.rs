//! Weakly supervised transductive regression with Gaussian labels.
//!
//! Each point carries a label distribution `N(a_i, σ_i)`. Minimizing the
//! squared-W2 data term over the observed points plus a graph smoothness term
//! `γ Σ_ij W_ij [(a_i - a_j)² + (σ_i - σ_j)²]` and a ridge term
//! `β (‖a‖² + ‖σ‖²)` gives two decoupled linear systems with one matrix:
//!
//! ```text
//! (B + 2γL) a* = Y₁₀        (B + 2γL) σ* = S₁₀
//! ```
//!
//! with `B_ii = β + 1` on observed points and `β` elsewhere, and `Y₁₀`, `S₁₀`
//! holding observed means and deviations (zero for unlabeled points).
//!
//! [`fit_lowrank`] solves them for a co-association similarity `H = R Rᵀ`
//! through the Woodbury identity; [`fit_dense`] is the kernel baseline with a
//! dense Cholesky solve.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::ensemble::{build_ensemble, coassociation_degree, coassociation_factor, EnsembleConfig};
use crate::error::{Error, Result};
use crate::kernels::{graph_laplacian, similarity_matrix, KernelSpec, DENSE_MAX_POINTS};
use crate::linalg::{Cholesky, DenseSymmetric, DiagonalMatrix, LowRankFactor, WoodburySolver};
use crate::metrics::GaussianLabel;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRole {
    /// Exact label, `s = 0`.
    Labeled,
    /// Uncertain label `N(a, s)`.
    Weak,
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakLabel {
    pub mean: f64,
    pub std: f64,
    pub role: LabelRole,
}

impl WeakLabel {
    pub fn labeled(y: f64) -> Self {
        Self {
            mean: y,
            std: 0.0,
            role: LabelRole::Labeled,
        }
    }

    pub fn weak(mean: f64, std: f64) -> Self {
        Self {
            mean,
            std,
            role: LabelRole::Weak,
        }
    }

    pub fn unlabeled() -> Self {
        Self {
            mean: 0.0,
            std: 0.0,
            role: LabelRole::Unlabeled,
        }
    }

    /// Labeled or weak.
    pub fn is_observed(&self) -> bool {
        self.role != LabelRole::Unlabeled
    }
}

/// How the kernel baseline uses weakly labeled points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakTreatment {
    /// Weak points are dropped to unlabeled (semi-supervised baseline).
    #[default]
    Unlabeled,
    /// Weak points keep their `(a, s)`.
    Weak,
}

impl WeakTreatment {
    pub fn apply(&self, labels: &[WeakLabel]) -> Vec<WeakLabel> {
        match self {
            WeakTreatment::Weak => labels.to_vec(),
            WeakTreatment::Unlabeled => labels
                .iter()
                .map(|l| {
                    if l.role == LabelRole::Weak {
                        WeakLabel::unlabeled()
                    } else {
                        *l
                    }
                })
                .collect(),
        }
    }
}

/// Ordering of the points with observed (labeled or weak) points first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledView {
    /// `order[pos]` is the original index of view position `pos`.
    order: Vec<usize>,
    n_observed: usize,
}

impl LabeledView {
    /// Stable partition: observed points first, each group in original order.
    pub fn new(labels: &[WeakLabel]) -> Self {
        let (mut order, rest): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&i| labels[i].is_observed());
        let n_observed = order.len();
        order.extend(rest);
        Self { order, n_observed }
    }

    /// A view with a caller-chosen order. `order` must be a permutation of
    /// `0..order.len()` and `n_observed <= order.len()`.
    pub fn from_order(order: Vec<usize>, n_observed: usize) -> Result<Self> {
        let n = order.len();
        if n_observed > n {
            return Err(Error::InconsistentView(format!("n1 = {n_observed} exceeds n = {n}")));
        }
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InconsistentView("order is not a permutation".into()));
            }
        }
        Ok(Self { order, n_observed })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn n_observed(&self) -> usize {
        self.n_observed
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Scatters a vector in view order back to original order.
    pub fn to_original(&self, in_view: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n());
        for (pos, &orig) in self.order.iter().enumerate() {
            out[orig] = in_view[pos];
        }
        out
    }

    /// Gathers a vector in original order into view order.
    pub fn to_view(&self, original: ArrayView1<f64>) -> Array1<f64> {
        self.order.iter().map(|&i| original[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Manifold regularization strength.
    pub gamma: f64,
    /// Ridge strength; positive `beta` keeps `B + 2γL` positive definite.
    pub beta: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            gamma: 0.001,
            beta: 0.001,
        }
    }
}

impl SolverParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        let p = Self { gamma, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Fitted label distribution `N(a*_i, σ*_i)` for every point, in original
/// point order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub a_star: Array1<f64>,
    pub sigma_star: Array1<f64>,
}

impl Prediction {
    pub fn len(&self) -> usize {
        self.a_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_star.is_empty()
    }

    pub fn distribution(&self, i: usize) -> GaussianLabel {
        GaussianLabel::new(self.a_star[i], self.sigma_star[i])
    }
}

/// Right-hand sides and ridge diagonal, in view order.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsParts {
    pub y10: Array1<f64>,
    pub s10: Array1<f64>,
    pub b: DiagonalMatrix,
}

impl RhsParts {
    /// The same three vectors permuted back to original point order.
    pub fn to_original(&self, view: &LabeledView) -> (Array1<f64>, Array1<f64>, DiagonalMatrix) {
        (
            view.to_original(self.y10.view()),
            view.to_original(self.s10.view()),
            DiagonalMatrix::new(view.to_original(self.b.values().view())),
        )
    }
}

pub fn assemble_rhs(labels: &[WeakLabel], view: &LabeledView, beta: f64) -> Result<RhsParts> {
    let n = view.n();
    if labels.len() != n {
        return Err(Error::InconsistentView(format!(
            "view covers {n} points, {} labels given",
            labels.len()
        )));
    }
    let n1 = view.n_observed();
    let mut y10 = Array1::zeros(n);
    let mut s10 = Array1::zeros(n);
    let mut b = Array1::from_elem(n, beta);
    for (pos, &i) in view.order().iter().enumerate() {
        let label = &labels[i];
        if label.is_observed() != (pos < n1) {
            return Err(Error::InconsistentView(format!(
                "point {i} ({:?}) sits at view position {pos} with n1 = {n1}",
                label.role
            )));
        }
        if pos < n1 {
            if !(label.mean.is_finite() && label.std.is_finite() && label.std >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "point {i} has invalid label N({}, {})",
                    label.mean, label.std
                )));
            }
            y10[pos] = label.mean;
            s10[pos] = label.std;
            b[pos] = beta + 1.0;
        }
    }
    Ok(RhsParts {
        y10,
        s10,
        b: DiagonalMatrix::new(b),
    })
}

fn original_order_rhs(
    labels: &[WeakLabel],
    beta: f64,
) -> Result<(Array1<f64>, Array1<f64>, DiagonalMatrix)> {
    let view = LabeledView::new(labels);
    Ok(assemble_rhs(labels, &view, beta)?.to_original(&view))
}

/// Clamps negative σ* entries to zero, logging how many were touched.
fn clamp_sigma(mut sigma: Array1<f64>) -> Array1<f64> {
    let mut count = 0usize;
    let mut worst = 0.0_f64;
    for v in sigma.iter_mut() {
        if *v < 0.0 {
            count += 1;
            worst = worst.min(*v);
            *v = 0.0;
        }
    }
    if count > 0 {
        log::warn!("clamped {count} negative sigma* entries to 0 (most negative {worst:e})");
    }
    sigma
}

fn finite_or_err(v: &Array1<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("non-finite {what} in solution")))
    }
}

/// Low-rank fit: `G = B + 2γD'`, then both systems through one Woodbury
/// factorization of `G - 2γ A Aᵀ = B + 2γ(D' - A Aᵀ)`.
pub fn fit_lowrank(
    labels: &[WeakLabel],
    params: &SolverParams,
    factor: &LowRankFactor,
    degree: &DiagonalMatrix,
) -> Result<Prediction> {
    params.validate()?;
    let n = labels.len();
    if factor.nrows() != n || degree.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} labels, factor has {} rows, degree has {} entries",
            factor.nrows(),
            degree.len()
        )));
    }
    let (y10, s10, b) = original_order_rhs(labels, params.beta)?;
    let g = b.add_scaled(2.0 * params.gamma, degree)?;
    let solver = WoodburySolver::new(&g, factor, params.gamma)?;
    let (a_star, sigma_star) = par::join(|| solver.solve(y10.view()), || solver.solve(s10.view()));
    let (a_star, sigma_star) = (a_star?, sigma_star?);
    Ok(Prediction {
        a_star,
        sigma_star: clamp_sigma(sigma_star),
    })
}

/// The co-association pieces shared by every fit on the same features.
#[derive(Debug, Clone)]
pub struct LowRankModel {
    pub factor: LowRankFactor,
    pub degree: DiagonalMatrix,
}

impl LowRankModel {
    /// Builds the cluster ensemble on `x` and its low-rank Laplacian pieces.
    pub fn from_features(x: ArrayView2<f64>, config: &EnsembleConfig) -> Result<Self> {
        let ensemble = build_ensemble(x, config)?;
        Ok(Self {
            factor: coassociation_factor(&ensemble),
            degree: coassociation_degree(&ensemble),
        })
    }

    pub fn fit(&self, labels: &[WeakLabel], params: &SolverParams) -> Result<Prediction> {
        fit_lowrank(labels, params, &self.factor, &self.degree)
    }
}

/// Dense Laplacian of a kernel similarity, shared by every fit on the same
/// features.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub laplacian: DenseSymmetric,
}

impl DenseModel {
    pub fn from_features(x: ArrayView2<f64>, spec: &KernelSpec) -> Result<Self> {
        check_dense_size(x.nrows())?;
        let w = similarity_matrix(x, spec)?;
        Ok(Self {
            laplacian: graph_laplacian(&w)?,
        })
    }

    pub fn fit(
        &self,
        labels: &[WeakLabel],
        params: &SolverParams,
        treat_weak_as: WeakTreatment,
    ) -> Result<Prediction> {
        params.validate()?;
        let n = self.laplacian.n();
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {n}-point Laplacian",
                labels.len()
            )));
        }
        let labels = treat_weak_as.apply(labels);
        let (y10, s10, b) = original_order_rhs(&labels, params.beta)?;
        let l = self.laplacian.as_array();
        let two_gamma = 2.0 * params.gamma;
        let system = DenseSymmetric::from_upper_fn(n, |i, j| {
            let off = two_gamma * l[[i, j]];
            if i == j {
                b.values()[i] + off
            } else {
                off
            }
        });
        let chol = Cholesky::factor(&system)?;
        let a_star = chol.solve(y10.view())?;
        let sigma_star = chol.solve(s10.view())?;
        finite_or_err(&a_star, "a*")?;
        Ok(Prediction {
            a_star,
            sigma_star: clamp_sigma(sigma_star),
        })
    }
}

pub fn check_dense_size(n: usize) -> Result<()> {
    if n > DENSE_MAX_POINTS {
        Err(Error::DenseMemoryGuard {
            n,
            limit: DENSE_MAX_POINTS,
        })
    } else {
        Ok(())
    }
}

/// Kernel baseline: `W` from `spec`, `L = D - W`, and a dense solve of
/// `(B + 2γL) x = rhs`.
pub fn fit_dense(
    x: ArrayView2<f64>,
    labels: &[WeakLabel],
    params: &SolverParams,
    spec: &KernelSpec,
    treat_weak_as: WeakTreatment,
) -> Result<Prediction> {
    params.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows, {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    DenseModel::from_features(x, spec)?.fit(labels, params, treat_weak_as)
}
