//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the solver code under test: systems are assembled from
//! pairwise loops and solved by plain Gaussian elimination.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use wsr_core::ensemble::{Partition, PartitionEnsemble};
use wsr_core::regression::{SolverParams, WeakLabel};

pub fn rel_err(x: &Array1<f64>, want: &Array1<f64>) -> f64 {
    let diff = (x - want).mapv(|v| v * v).sum().sqrt();
    let norm = want.mapv(|v| v * v).sum().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(m: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut a = m.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..n {
                a.swap([col, k], [pivot, k]);
            }
            x.swap(col, pivot);
        }
        let p = a[[col, col]];
        assert!(p != 0.0, "singular oracle system");
        for row in (col + 1)..n {
            let f = a[[row, col]] / p;
            if f != 0.0 {
                for k in col..n {
                    a[[row, k]] -= f * a[[col, k]];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in (row + 1)..n {
            s -= a[[row, k]] * x[k];
        }
        x[row] = s / a[[row, row]];
    }
    x
}

/// `Σ_l ω_l 𝕀[c_l(i) = c_l(j)]` by explicit double loop.
pub fn coassociation_by_loops(e: &PartitionEnsemble) -> Array2<f64> {
    let n = e.n();
    let mut h = Array2::zeros((n, n));
    for (p, w) in e.partitions().iter().zip(e.weights()) {
        for i in 0..n {
            for j in 0..n {
                if p.labels()[i] == p.labels()[j] {
                    h[[i, j]] += w;
                }
            }
        }
    }
    h
}

/// `B + 2γ(D - W)` with `D_ii = Σ_j W_ij`, assembled entry by entry.
pub fn system_matrix(labels: &[WeakLabel], w: &Array2<f64>, params: &SolverParams) -> Array2<f64> {
    let n = labels.len();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            degree += w[[i, j]];
            m[[i, j]] = -2.0 * params.gamma * w[[i, j]];
        }
        m[[i, i]] += 2.0 * params.gamma * degree + params.beta;
        if labels[i].is_observed() {
            m[[i, i]] += 1.0;
        }
    }
    m
}

pub fn rhs(labels: &[WeakLabel]) -> (Array1<f64>, Array1<f64>) {
    let y = labels.iter().map(|l| if l.is_observed() { l.mean } else { 0.0 }).collect();
    let s = labels.iter().map(|l| if l.is_observed() { l.std } else { 0.0 }).collect();
    (y, s)
}

/// Direct solution of both systems for similarity `w`.
pub fn oracle_fit(labels: &[WeakLabel], w: &Array2<f64>, params: &SolverParams) -> (Array1<f64>, Array1<f64>) {
    let m = system_matrix(labels, w, params);
    let (y, s) = rhs(labels);
    (gauss_solve(&m, &y), gauss_solve(&m, &s))
}

/// The objective
/// `Σ_obs [(y_i - a_i)² + (s_i - σ_i)²] + γ Σ_{i,j} W_ij [(a_i - a_j)² + (σ_i - σ_j)²]
///  + β (‖a‖² + ‖σ‖²)`.
pub fn objective(
    labels: &[WeakLabel],
    w: &Array2<f64>,
    params: &SolverParams,
    a: &Array1<f64>,
    sigma: &Array1<f64>,
) -> f64 {
    let n = labels.len();
    let mut j = 0.0;
    for i in 0..n {
        if labels[i].is_observed() {
            j += (labels[i].mean - a[i]).powi(2) + (labels[i].std - sigma[i]).powi(2);
        }
    }
    for i in 0..n {
        for k in 0..n {
            j += params.gamma * w[[i, k]] * ((a[i] - a[k]).powi(2) + (sigma[i] - sigma[k]).powi(2));
        }
    }
    j + params.beta * (a.mapv(|v| v * v).sum() + sigma.mapv(|v| v * v).sum())
}

/// Analytic gradient:
/// `∂J/∂a_i = 2(a_i - y_i)·[i observed] + 4γ Σ_j W_ij (a_i - a_j) + 2β a_i`,
/// and the same form for σ with `s` in place of `y`.
pub fn gradient(
    labels: &[WeakLabel],
    w: &Array2<f64>,
    params: &SolverParams,
    a: &Array1<f64>,
    sigma: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let n = labels.len();
    let mut ga = Array1::zeros(n);
    let mut gs = Array1::zeros(n);
    for i in 0..n {
        if labels[i].is_observed() {
            ga[i] += 2.0 * (a[i] - labels[i].mean);
            gs[i] += 2.0 * (sigma[i] - labels[i].std);
        }
        for k in 0..n {
            ga[i] += 4.0 * params.gamma * w[[i, k]] * (a[i] - a[k]);
            gs[i] += 4.0 * params.gamma * w[[i, k]] * (sigma[i] - sigma[k]);
        }
        ga[i] += 2.0 * params.beta * a[i];
        gs[i] += 2.0 * params.beta * sigma[i];
    }
    (ga, gs)
}

/// Central differences of [`objective`] in every coordinate of `a` and `σ`.
pub fn finite_difference_gradient(
    labels: &[WeakLabel],
    w: &Array2<f64>,
    params: &SolverParams,
    a: &Array1<f64>,
    sigma: &Array1<f64>,
    h: f64,
) -> (Array1<f64>, Array1<f64>) {
    let n = labels.len();
    let mut ga = Array1::zeros(n);
    let mut gs = Array1::zeros(n);
    for i in 0..n {
        let (mut ap, mut am) = (a.clone(), a.clone());
        ap[i] += h;
        am[i] -= h;
        ga[i] = (objective(labels, w, params, &ap, sigma) - objective(labels, w, params, &am, sigma)) / (2.0 * h);
        let (mut sp, mut sm) = (sigma.clone(), sigma.clone());
        sp[i] += h;
        sm[i] -= h;
        gs[i] = (objective(labels, w, params, a, &sp) - objective(labels, w, params, a, &sm)) / (2.0 * h);
    }
    (ga, gs)
}

/// Squared 2-Wasserstein distance between two normals as the quantile
/// integral `∫₀¹ (F_p⁻¹(u) - F_q⁻¹(u))² du`, evaluated numerically.
pub struct QuantileW2 {
    /// Probability levels `u_k = Φ(t_k)` and weights `w_k = φ(t_k)·Δt·simpson`.
    levels: Vec<(f64, f64)>,
}

impl QuantileW2 {
    /// Composite Simpson rule after substituting `u = Φ(t)` on `t ∈ [-10, 10]`.
    pub fn new(intervals: usize) -> Self {
        let intervals = intervals + intervals % 2;
        let std = Normal::new(0.0, 1.0).unwrap();
        let (lo, hi) = (-10.0, 10.0);
        let dt = (hi - lo) / intervals as f64;
        let levels = (0..=intervals)
            .map(|k| {
                let t = lo + k as f64 * dt;
                let simpson = if k == 0 || k == intervals {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                (std.cdf(t), std.pdf(t) * dt * simpson / 3.0)
            })
            .filter(|(u, _)| *u > 0.0 && *u < 1.0)
            .collect();
        Self { levels }
    }

    pub fn distance(&self, p: (f64, f64), q: (f64, f64)) -> f64 {
        let fp = Normal::new(p.0, p.1).unwrap();
        let fq = Normal::new(q.0, q.1).unwrap();
        self.levels
            .iter()
            .map(|&(u, wt)| (fp.inverse_cdf(u) - fq.inverse_cdf(u)).powi(2) * wt)
            .sum()
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[[i, i]]).collect()
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// `r` random partitions with random cluster counts and random weights.
pub fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, r: usize, k_max: usize) -> PartitionEnsemble {
    let partitions: Vec<Partition> = (0..r)
        .map(|_| {
            let k = rng.random_range(1..=k_max);
            let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
            Partition::new(labels, k).unwrap()
        })
        .collect();
    let raw: Vec<f64> = (0..r).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = weights[..r - 1].iter().sum();
    weights[r - 1] = 1.0 - head;
    PartitionEnsemble::new(partitions, weights).unwrap()
}

/// Random roles: at least one observed point, a mix of labeled, weak and
/// unlabeled points.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<WeakLabel> {
    let mut labels: Vec<WeakLabel> = (0..n)
        .map(|_| match rng.random_range(0..10) {
            0 | 1 => WeakLabel::labeled(rng.random_range(-3.0..3.0)),
            2..=4 => WeakLabel::weak(rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0)),
            _ => WeakLabel::unlabeled(),
        })
        .collect();
    labels[0] = WeakLabel::weak(rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0));
    labels
}
